#include "dse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "dse/trainer.hpp"

namespace dse {

// ---------------------------------------------------------------------------
// Feature sources

ModelFeatures::ModelFeatures(const DseModel& model, const Vocabulary& vocab, Variant variant, bool normalize)
    : model_(model), vocab_(vocab), variant_(variant), normalize_(normalize) {
    if (model.vocab_size() != vocab.size()) throw InputError("model and vocabulary sizes differ");
}

bool ModelFeatures::lookup(std::string_view word, Domain domain, std::span<double> out) const {
    const auto id = vocab_.find(word);
    if (!id) return false;
    compose(model_, *id, domain, variant_, out);
    if (normalize_) {
        const double n = norm(out);
        if (n > 0.0)
            for (double& v : out) v /= n;
    }
    return true;
}

TableFeatures::TableFeatures(EmbeddingTable table) : table_(std::move(table)) {
    for (std::size_t i = 0; i < table_.words.size(); ++i) index_.emplace(table_.words[i], i);
}

TableFeatures::TableFeatures(const Vocabulary& vocab, Matrix vectors) {
    if (vectors.rows() != vocab.size()) throw InputError("embedding rows do not match vocabulary size");
    for (std::size_t i = 0; i < vocab.size(); ++i) table_.words.push_back(vocab.word(static_cast<WordId>(i)));
    table_.vectors = std::move(vectors);
    for (std::size_t i = 0; i < table_.words.size(); ++i) index_.emplace(table_.words[i], i);
}

bool TableFeatures::lookup(std::string_view word, Domain, std::span<double> out) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return false;
    const auto row = table_.vectors.row(it->second);
    std::copy(row.begin(), row.end(), out.begin());
    return true;
}

bool ConcatFeatures::lookup(std::string_view word, Domain domain, std::span<double> out) const {
    auto left = out.first(a_.dim());
    auto right = out.subspan(a_.dim());
    const bool ha = a_.lookup(word, domain, left);
    if (!ha) std::fill(left.begin(), left.end(), 0.0);
    const bool hb = b_.lookup(word, domain, right);
    if (!hb) std::fill(right.begin(), right.end(), 0.0);
    return ha || hb;
}

FeatureVector review_features(const TextReview& review, const FeatureSource& features) {
    FeatureVector fv;
    fv.values.assign(features.dim(), 0.0);
    std::vector<double> buf(features.dim());
    std::size_t found = 0;
    for (const auto& token : review.tokens) {
        if (!features.lookup(token, review.domain, buf)) {
            ++fv.oov_tokens;
            continue;
        }
        axpy(1.0, buf, fv.values);
        ++found;
    }
    if (found == 0) {
        fv.all_oov = true;
    } else {
        for (double& v : fv.values) v /= static_cast<double>(found);
    }
    return fv;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

struct Problem {
    const Matrix& x;  // standardized
    std::span<const int> y;
    double l2;
};

// Mean log-loss plus l2/2 |w|^2; writes the gradient when asked.
double objective(const Problem& p, std::span<const double> w, double b, std::vector<double>* gw, double* gb) {
    const std::size_t n = p.x.rows();
    double loss = 0.0;
    if (gw) std::fill(gw->begin(), gw->end(), 0.0);
    if (gb) *gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = dot(w, p.x.row(i)) + b;
        const double sign = p.y[i] == 1 ? 1.0 : -1.0;
        loss -= log_sigmoid(sign * z);
        if (gw) {
            // d/dz of -log sigmoid(sign z) is -sign * sigmoid(-sign z)
            const double coef = -sign * (1.0 / (1.0 + std::exp(sign * z)));
            axpy(coef / static_cast<double>(n), p.x.row(i), *gw);
            *gb += coef / static_cast<double>(n);
        }
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * p.l2 * dot(w, w);
    if (gw) axpy(p.l2, w, *gw);
    return loss;
}

}  // namespace

LinearClassifier train_linear_classifier(const Matrix& features, std::span<const int> labels,
                                         const ClassifierOptions& options) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (labels.size() != n) throw InputError("feature and label counts differ");
    std::array<std::size_t, 2> per_class{0, 0};
    for (int y : labels) {
        if (y != 0 && y != 1) throw InputError("labels must be 0 or 1");
        ++per_class[static_cast<std::size_t>(y)];
    }
    if (per_class[0] == 0 || per_class[1] == 0)
        throw InputError("classifier training needs at least one example of each class");

    LinearClassifier clf;
    clf.mean.assign(d, 0.0);
    clf.scale.assign(d, 1.0);
    if (options.standardize) {
        for (std::size_t i = 0; i < n; ++i) axpy(1.0, features.row(i), clf.mean);
        for (double& m : clf.mean) m /= static_cast<double>(n);
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = features.row(i);
            for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - clf.mean[j]) * (r[j] - clf.mean[j]);
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(n));
            clf.scale[j] = sd > 1e-12 ? sd : 1.0;
        }
    }
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = features.row(i);
        auto dst = x.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = (src[j] - clf.mean[j]) / clf.scale[j];
    }

    const Problem problem{x, labels, options.l2};
    std::vector<double> w(d, 0.0), gw(d), trial(d);
    double b = std::log(static_cast<double>(per_class[1]) / static_cast<double>(per_class[0]));
    double gb = 0.0;
    double f = objective(problem, w, b, &gw, &gb);
    double step = 1.0;
    for (int it = 0; it < options.max_iterations; ++it) {
        const double g2 = dot(gw, gw) + gb * gb;
        if (std::sqrt(g2) < options.tolerance) break;
        bool accepted = false;
        while (step > 1e-12) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] - step * gw[j];
            const double tb = b - step * gb;
            const double ft = objective(problem, trial, tb, nullptr, nullptr);
            if (ft <= f - 1e-4 * step * g2) {
                w.swap(trial);
                b = tb;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        f = objective(problem, w, b, &gw, &gb);
        step = std::min(step * 2.0, 64.0);
    }
    clf.weights = std::move(w);
    clf.bias = b;
    return clf;
}

double LinearClassifier::decision(std::span<const double> x) const {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * (x[j] - mean[j]) / scale[j];
    return z;
}

std::vector<double> LinearClassifier::direction() const {
    std::vector<double> out(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) out[j] = weights[j] / scale[j];
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

EvalReport score_predictions(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw InputError("truth and prediction counts differ");
    // confusion[t][p]
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];

    EvalReport r;
    r.test_size = truth.size();
    const std::size_t correct = confusion[0][0] + confusion[1][1];
    r.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t tp = confusion[c][c];
        const std::size_t fp = confusion[1 - c][c];
        const std::size_t fn = confusion[c][1 - c];
        auto& m = r.per_class[c];
        m.support = tp + fn;
        m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    }
    r.macro_f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2.0;
    return r;
}

nlohmann::json EvalReport::to_json() const {
    using nlohmann::json;
    auto cls = [](const ClassMetrics& m) {
        return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    };
    json folds_json = json::array();
    for (const auto& f : folds)
        folds_json.push_back({{"fold", f.fold},
                              {"train_size", f.train_size},
                              {"test_size", f.test_size},
                              {"accuracy", f.accuracy},
                              {"macro_f1", f.macro_f1}});
    return json{{"accuracy", accuracy},
                {"macro_f1", macro_f1},
                {"per_class", {{"negative", cls(per_class[0])}, {"positive", cls(per_class[1])}}},
                {"folds", folds_json},
                {"oov_dropped", oov_dropped},
                {"all_oov_reviews", all_oov_reviews},
                {"test_size", test_size},
                {"split_seed", split_seed}};
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "accuracy   %.4f\nmacro-F1   %.4f\n", accuracy, macro_f1);
    out << buf;
    out << "class      precision  recall  f1      support\n";
    const char* names[2] = {"negative", "positive"};
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& m = per_class[c];
        std::snprintf(buf, sizeof buf, "%-10s %-10.4f %-7.4f %-7.4f %zu\n", names[c], m.precision, m.recall, m.f1,
                      m.support);
        out << buf;
    }
    for (const auto& f : folds) {
        std::snprintf(buf, sizeof buf, "fold %d     acc %.4f  macro-F1 %.4f  (train %zu, test %zu)\n", f.fold,
                      f.accuracy, f.macro_f1, f.train_size, f.test_size);
        out << buf;
    }
    out << "oov dropped " << oov_dropped << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Review classification

ReviewSplit split_reviews(std::span<const TextReview> labeled, Domain domain, std::size_t train_per_class,
                          std::size_t test_per_class, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labeled.size(); ++i)
        if (labeled[i].domain == domain) by_class[static_cast<std::size_t>(labeled[i].label)].push_back(i);

    ReviewSplit split;
    std::mt19937_64 rng(seed);
    for (auto& ids : by_class) std::shuffle(ids.begin(), ids.end(), rng);
    for (const auto& ids : by_class) {
        std::size_t n_train = train_per_class;
        std::size_t n_test = test_per_class;
        if (ids.size() < train_per_class + test_per_class) {
            split.proportional = true;
            n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(ids.size())));
            n_test = ids.size() - n_train;
        }
        for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(labeled[ids[i]]);
        for (std::size_t i = n_train; i < n_train + n_test; ++i) split.test.push_back(labeled[ids[i]]);
    }
    return split;
}

namespace {

struct FeatureMatrix {
    Matrix x;
    std::vector<int> y;
    std::size_t oov_tokens = 0;
    std::size_t all_oov = 0;
};

FeatureMatrix featurize(std::span<const TextReview> reviews, const FeatureSource& features) {
    FeatureMatrix fm;
    fm.x = Matrix(reviews.size(), features.dim());
    for (std::size_t i = 0; i < reviews.size(); ++i) {
        const FeatureVector fv = review_features(reviews[i], features);
        std::copy(fv.values.begin(), fv.values.end(), fm.x.row(i).begin());
        fm.y.push_back(reviews[i].label);
        fm.oov_tokens += fv.oov_tokens;
        fm.all_oov += fv.all_oov;
    }
    return fm;
}

}  // namespace

EvalReport evaluate_reviews(std::span<const TextReview> train, std::span<const TextReview> test,
                            const FeatureSource& features, const ClassifierOptions& options,
                            std::vector<int>* predictions) {
    const FeatureMatrix tr = featurize(train, features);
    const FeatureMatrix te = featurize(test, features);
    const LinearClassifier clf = train_linear_classifier(tr.x, tr.y, options);
    std::vector<int> predicted(te.y.size());
    for (std::size_t i = 0; i < te.y.size(); ++i) predicted[i] = clf.predict(te.x.row(i));
    EvalReport report = score_predictions(te.y, predicted);
    report.oov_dropped = tr.oov_tokens + te.oov_tokens;
    report.all_oov_reviews = tr.all_oov + te.all_oov;
    if (predictions) *predictions = std::move(predicted);
    return report;
}

void write_sparse_features(std::ostream& out, std::span<const TextReview> reviews, const FeatureSource& features) {
    char buf[64];
    for (const auto& r : reviews) {
        const FeatureVector fv = review_features(r, features);
        out << (r.label == 1 ? "+1" : "-1");
        for (std::size_t j = 0; j < fv.values.size(); ++j) {
            if (fv.values[j] == 0.0) continue;
            std::snprintf(buf, sizeof buf, " %zu:%.6g", j + 1, fv.values[j]);
            out << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Lexicon classification

std::size_t Lexicon::count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [label](const LexiconEntry& e) { return e.label == label; }));
}

Lexicon load_lexicon(std::istream& in, const PreprocessConfig& cfg) {
    Lexicon lex;
    std::unordered_map<std::string, std::size_t> seen;  // stem -> entry index
    std::vector<bool> conflicted;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw InputError("lexicon line " + std::to_string(lineno) + ": expected word<TAB>label");
        const std::string word = line.substr(0, tab);
        const std::string tag = line.substr(tab + 1);
        int label = 0;
        if (tag == "positive") {
            label = 1;
            ++lex.positive_raw;
        } else if (tag == "negative") {
            label = 0;
            ++lex.negative_raw;
        } else {
            throw InputError("lexicon line " + std::to_string(lineno) + ": label '" + tag +
                             "' is not positive or negative");
        }
        const auto tokens = tokenize(word, cfg);
        if (tokens.empty()) {
            ++lex.stopwords_dropped;
            continue;
        }
        if (tokens.size() > 1) {
            ++lex.phrases_dropped;
            continue;
        }
        const auto [it, inserted] = seen.emplace(tokens[0], lex.entries.size());
        if (inserted) {
            lex.entries.push_back({tokens[0], label});
            conflicted.push_back(false);
        } else if (lex.entries[it->second].label == label) {
            ++lex.duplicates_merged;
        } else {
            conflicted[it->second] = true;
        }
    }
    // Stems that collapse words of opposite polarity carry no usable label.
    std::vector<LexiconEntry> kept;
    for (std::size_t i = 0; i < lex.entries.size(); ++i) {
        if (conflicted[i]) {
            ++lex.conflicts_dropped;
        } else {
            kept.push_back(std::move(lex.entries[i]));
        }
    }
    lex.entries = std::move(kept);
    return lex;
}

Lexicon load_lexicon_file(const std::filesystem::path& path, const PreprocessConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lexicon file '" + path.string() + "'");
    return load_lexicon(in, cfg);
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("need at least 2 folds");
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<int> assignment(labels.size(), -1);
    std::size_t next = 0;
    for (auto& ids : by_class) {
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t id : ids) assignment[id] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }
    return assignment;
}

EvalReport evaluate_lexicon(const Lexicon& lexicon, const FeatureSource& features, const LexiconOptions& options) {
    std::vector<TextReview> items;
    std::size_t oov = 0;
    std::vector<double> buf(features.dim());
    for (const auto& e : lexicon.entries) {
        if (!features.lookup(e.word, Domain::p, buf)) {
            ++oov;
            continue;
        }
        items.push_back({Domain::p, e.label, {e.word}});
    }
    std::vector<int> labels;
    for (const auto& it : items) labels.push_back(it.label);
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t negatives = labels.size() - positives;
    const auto k = static_cast<std::size_t>(options.folds);
    if (positives < k || negatives < k)
        throw InputError("lexicon has " + std::to_string(positives) + " positive and " + std::to_string(negatives) +
                         " negative in-vocabulary terms; need at least " + std::to_string(k) + " of each");

    const auto fold_of = stratified_folds(labels, options.folds, options.seed);
    EvalReport report;
    report.oov_dropped = oov;
    report.split_seed = options.seed;
    for (int f = 0; f < options.folds; ++f) {
        std::vector<TextReview> train, test;
        for (std::size_t i = 0; i < items.size(); ++i) (fold_of[i] == f ? test : train).push_back(items[i]);
        const EvalReport fr = evaluate_reviews(train, test, features, options.classifier);
        report.folds.push_back({f, train.size(), test.size(), fr.accuracy, fr.macro_f1});
        report.accuracy += fr.accuracy;
        report.macro_f1 += fr.macro_f1;
        report.test_size += fr.test_size;
        for (std::size_t c = 0; c < 2; ++c) {
            report.per_class[c].precision += fr.per_class[c].precision;
            report.per_class[c].recall += fr.per_class[c].recall;
            report.per_class[c].f1 += fr.per_class[c].f1;
            report.per_class[c].support += fr.per_class[c].support;
        }
    }
    const double nf = static_cast<double>(options.folds);
    report.accuracy /= nf;
    report.macro_f1 /= nf;
    for (auto& m : report.per_class) {
        m.precision /= nf;
        m.recall /= nf;
        m.f1 /= nf;
    }
    return report;
}

// ---------------------------------------------------------------------------

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

std::vector<Neighbor> nearest_neighbors(const DseModel& model, const Vocabulary& vocab, std::string_view word,
                                        Domain domain, Variant variant, std::size_t k) {
    const auto query = vocab.find(word);
    if (!query) throw InputError("'" + std::string(word) + "' is not in the vocabulary");
    const auto q = compose(model, *query, domain, variant);
    std::vector<double> buf(q.size());
    std::vector<std::pair<double, WordId>> scored;
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        const auto id = static_cast<WordId>(w);
        if (id == *query) continue;
        compose(model, id, domain, variant, buf);
        scored.emplace_back(cosine(q, buf), id);
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back({vocab.word(scored[i].second), scored[i].first});
    return out;
}

}  // namespace dse
