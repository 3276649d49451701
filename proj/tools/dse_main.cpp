#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dse/corpus.hpp"
#include "dse/eval.hpp"
#include "dse/model.hpp"
#include "dse/synthetic.hpp"
#include "dse/trainer.hpp"
#include "dse/vocab.hpp"

namespace fs = std::filesystem;
using namespace dse;

namespace {

constexpr const char* kModelFile = "model.dsem";
constexpr const char* kVocabFile = "vocab.tsv";
constexpr const char* kEmbeddingsFile = "embeddings.txt";
constexpr const char* kLogFile = "train.log";

struct StageError {
    std::string stage;
    std::string message;
    int code;
};

// Runs one pipeline stage, tagging any failure with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const InputError& e) {
        throw StageError{name, e.what(), 2};
    } catch (const std::exception& e) {
        throw StageError{name, e.what(), 1};
    }
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// ---------------------------------------------------------------------------
// Shared option groups

struct PreprocessArgs {
    int min_review_tokens = 5;
    std::string stopwords_file;
    bool no_stem = false;
    bool keep_case = false;

    void add(CLI::App* app) {
        app->add_option("--min-review-tokens", min_review_tokens, "Drop reviews with fewer tokens after preprocessing");
        app->add_option("--stopwords", stopwords_file, "Stopword list, one word per line (default: built-in English list)");
        app->add_flag("--no-stem", no_stem, "Disable Porter stemming");
        app->add_flag("--keep-case", keep_case, "Disable lowercasing");
    }

    PreprocessConfig build() const {
        PreprocessConfig cfg;
        cfg.min_review_tokens = min_review_tokens;
        cfg.stem = !no_stem;
        cfg.lowercase = !keep_case;
        if (!stopwords_file.empty()) {
            std::ifstream in(stopwords_file);
            if (!in) throw InputError("cannot open stopword list '" + stopwords_file + "'");
            cfg.stopwords.clear();
            std::string w;
            while (std::getline(in, w)) {
                while (!w.empty() && (w.back() == '\r' || w.back() == ' ')) w.pop_back();
                if (!w.empty()) cfg.stopwords.insert(w);
            }
        }
        cfg.validate();
        return cfg;
    }
};

DomainNames parse_domain_names(const std::vector<std::string>& names) {
    DomainNames d;
    if (names.empty()) return d;
    if (names.size() != 2 || names[0].empty() || names[1].empty() || names[0] == names[1])
        throw InputError("--domain-names needs two distinct names");
    d.names = {names[0], names[1]};
    return d;
}

Corpus load_corpora(const std::vector<std::string>& paths, const PreprocessConfig& cfg, DomainNames domains) {
    if (paths.empty()) throw InputError("no corpus file given");
    Corpus all;
    all.domains = domains;
    for (const auto& p : paths) {
        if (!fs::exists(p)) throw InputError("corpus file '" + p + "' does not exist");
        LoadOptions opts;
        opts.domains = all.domains;
        Corpus c = load_corpus_file(p, cfg, opts);
        append_corpus(all, std::move(c));
    }
    return all;
}

// Accepts a configured domain name, or p / q for the first / second domain.
Domain resolve_domain(const DomainNames& names, const std::string& s) {
    if (names.contains(s)) return names.resolve(s);
    if (s == "p") return Domain::p;
    if (s == "q") return Domain::q;
    return names.resolve(s);
}

struct ModelBundle {
    DseModel model;
    Vocabulary vocab;
};

ModelBundle load_model_dir(const std::string& dir) {
    ModelBundle b;
    const fs::path base(dir);
    b.model = load_model(base / kModelFile);
    std::ifstream in(base / kVocabFile);
    if (!in) throw InputError("cannot open '" + (base / kVocabFile).string() + "'");
    b.vocab = Vocabulary::read(in);
    if (b.vocab.size() != b.model.vocab_size())
        throw InputError("vocabulary size " + std::to_string(b.vocab.size()) + " does not match model size " +
                         std::to_string(b.model.vocab_size()));
    return b;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::vector<std::string> corpus;
    std::vector<std::string> domain_names;
    std::string out;
    std::string mode = "dse";
    std::string domains = "both";
    std::size_t dim = 200;
    int window = 3;
    int negatives = 5;
    int iters = 100;
    double lr = 1.0;
    std::uint64_t seed = 1;
    int min_count = 5;
    int threads = 1;
    bool deterministic = false;
    double subsample = 0.0;
    bool quiet = false;
    PreprocessArgs pre;
};

int run_train(const TrainArgs& a) {
    const PreprocessConfig cfg = stage("config", [&] { return a.pre.build(); });
    TrainConfig tc;
    const DomainNames names = stage("config", [&] {
        if (a.mode != "dse" && a.mode != "skipgram") throw InputError("--mode must be dse or skipgram");
        tc.mode = a.mode == "dse" ? TrainMode::dse : TrainMode::skipgram;
        tc.dim = a.dim;
        tc.window = a.window;
        tc.negatives = a.negatives;
        tc.iterations = a.iters;
        tc.learning_rate = a.lr;
        tc.seed = a.seed;
        tc.threads = a.threads;
        tc.deterministic = a.deterministic || a.threads <= 1;
        if (a.deterministic && a.threads > 1) warn("--deterministic runs single-threaded; --threads ignored");
        tc.subsample = a.subsample;
        tc.validate();
        return parse_domain_names(a.domain_names);
    });

    Corpus corpus = stage("corpus", [&] {
        Corpus c = load_corpora(a.corpus, cfg, names);
        if (tc.mode == TrainMode::dse && (c.count(Domain::p) == 0 || c.count(Domain::q) == 0))
            throw InputError("dse training needs reviews from exactly two domains");
        return c;
    });
    if (!a.quiet)
        std::cerr << "corpus: " << corpus.stats.kept << " reviews kept (" << corpus.domains[Domain::p] << ' '
                  << corpus.count(Domain::p) << ", " << corpus.domains[Domain::q] << ' ' << corpus.count(Domain::q)
                  << "), " << corpus.stats.dropped_neutral << " neutral, " << corpus.stats.dropped_short
                  << " short, " << corpus.stats.dropped_blank << " blank\n";

    VocabBuild vb = stage("vocab", [&] { return build_vocab(corpus.reviews, a.min_count); });
    if (!a.quiet)
        std::cerr << "vocab: " << vb.vocab.size() << " words, " << vb.dropped_tokens << " rare tokens dropped, "
                  << vb.dropped_reviews << " reviews emptied\n";

    const fs::path out_dir(a.out);
    stage("output", [&] {
        fs::create_directories(out_dir);
        std::ofstream v(out_dir / kVocabFile, std::ios::binary);
        if (!v) throw std::runtime_error("cannot write '" + (out_dir / kVocabFile).string() + "'");
        vb.vocab.write(v);
    });

    std::ostringstream log;
    log << "# mode=" << a.mode << " dim=" << tc.dim << " window=" << tc.window << " negatives=" << tc.negatives
        << " iters=" << tc.iterations << " lr=" << tc.learning_rate << " seed=" << tc.seed
        << " min_count=" << a.min_count << " threads=" << (tc.deterministic ? 1 : tc.threads)
        << " subsample=" << tc.subsample << " stopwords=" << kStopwordListVersion << '\n';
    log << "# sweep\tmean_objective\tmean_prior\tseconds\n";
    auto on_sweep = [&](const SweepStats& s) {
        const std::string line = format_sweep(s);
        log << line << '\n';
        if (!a.quiet) std::cerr << "sweep " << line << '\n';
    };

    if (tc.mode == TrainMode::dse) {
        TrainResult r = stage("train", [&] { return train(vb.reviews, vb.vocab, tc, corpus.domains, on_sweep); });
        stage("output", [&] { save_model(r.model, out_dir / kModelFile); });
    } else {
        const std::optional<Domain> slice = stage("config", [&]() -> std::optional<Domain> {
            if (a.domains == "both") return std::nullopt;
            return resolve_domain(corpus.domains, a.domains);
        });
        SkipGramResult r = stage("train", [&] { return train_skipgram(vb.reviews, vb.vocab, tc, slice, on_sweep); });
        stage("output", [&] {
            std::ofstream e(out_dir / kEmbeddingsFile, std::ios::binary);
            if (!e) throw std::runtime_error("cannot write '" + (out_dir / kEmbeddingsFile).string() + "'");
            write_text_embeddings(e, vb.vocab, r.input);
        });
    }
    stage("output", [&] { write_text_file(out_dir / kLogFile, log.str()); });
    return 0;
}

// ---------------------------------------------------------------------------
// Feature selection shared by the evaluation commands

struct FeatureArgs {
    std::string model_dir;
    std::vector<std::string> embeddings;
    std::string variant = "dse_w";
    bool normalize = false;

    void add(CLI::App* app, bool with_variant) {
        auto* m = app->add_option("--model-dir", model_dir, "Directory written by `dse train --mode dse`");
        auto* e = app->add_option("--embeddings", embeddings,
                                  "Text embedding file; give two to concatenate them")
                      ->expected(1, 2);
        m->excludes(e);
        if (with_variant)
            app->add_option("--variant", variant, "Composition: dse_w, dse_c, common or specific");
        app->add_flag("--normalize", normalize, "L2-normalize composed word vectors (model features only)");
    }
};

struct LoadedFeatures {
    std::optional<ModelBundle> bundle;
    std::vector<std::unique_ptr<FeatureSource>> owned;
    const FeatureSource* source = nullptr;
    std::string description;
};

LoadedFeatures load_features(const FeatureArgs& a, std::optional<Variant> forced) {
    LoadedFeatures f;
    if (!a.model_dir.empty()) {
        const Variant v = forced ? *forced : parse_variant(a.variant);
        f.bundle = load_model_dir(a.model_dir);
        f.owned.push_back(std::make_unique<ModelFeatures>(f.bundle->model, f.bundle->vocab, v, a.normalize));
        f.description = std::string(to_string(v));
    } else if (!a.embeddings.empty()) {
        for (const auto& p : a.embeddings) {
            if (!fs::exists(p)) throw InputError("embedding file '" + p + "' does not exist");
            f.owned.push_back(std::make_unique<TableFeatures>(read_text_embeddings(fs::path(p))));
        }
        if (f.owned.size() == 2) f.owned.push_back(std::make_unique<ConcatFeatures>(*f.owned[0], *f.owned[1]));
        f.description = f.owned.size() == 1 ? "embeddings" : "embeddings_concat";
    } else {
        throw InputError("give --model-dir or --embeddings");
    }
    f.source = f.owned.back().get();
    return f;
}

// ---------------------------------------------------------------------------
// eval-reviews

struct EvalReviewsArgs {
    FeatureArgs features;
    std::vector<std::string> labeled;
    std::vector<std::string> domain_names;
    std::uint64_t split_seed = 1;
    std::size_t train_per_class = 800;
    std::size_t test_per_class = 200;
    std::string json;
    std::string export_features;
    PreprocessArgs pre;
};

int run_eval_reviews(const EvalReviewsArgs& a) {
    const PreprocessConfig cfg = stage("config", [&] { return a.pre.build(); });
    LoadedFeatures feats = stage("model", [&] { return load_features(a.features, std::nullopt); });

    DomainNames names = stage("config", [&] { return parse_domain_names(a.domain_names); });
    if (feats.bundle && a.domain_names.empty()) names = feats.bundle->model.domains;
    Corpus labeled = stage("corpus", [&] { return load_corpora(a.labeled, cfg, names); });

    stage("eval", [&] {
        std::size_t total = 0, missing = 0;
        std::vector<double> buf(feats.source->dim());
        for (const auto& r : labeled.reviews)
            for (const auto& t : r.tokens) {
                ++total;
                if (!feats.source->lookup(t, r.domain, buf)) ++missing;
            }
        const double rate = total ? 100.0 * static_cast<double>(missing) / static_cast<double>(total) : 100.0;
        char msg[160];
        std::snprintf(msg, sizeof msg, "OOV rate %.1f%% (%zu of %zu tokens)", rate, missing, total);
        if (total == 0 || missing == total)
            throw InputError(std::string("labeled reviews contain no in-vocabulary words: ") + msg);
        std::cerr << "labeled: " << labeled.reviews.size() << " reviews, " << msg << '\n';
    });

    nlohmann::json doc;
    std::ostringstream table;
    std::vector<int> truth, predicted;
    EvalReport overall;
    stage("eval", [&] {
        nlohmann::json per_domain = nlohmann::json::object();
        std::size_t oov = 0, all_oov = 0;
        for (Domain d : {Domain::p, Domain::q}) {
            if (labeled.count(d) == 0) continue;
            const std::string& name = labeled.domains[d];
            ReviewSplit split = split_reviews(labeled.reviews, d, a.train_per_class, a.test_per_class, a.split_seed);
            if (split.proportional)
                warn("domain '" + name + "' has fewer than " + std::to_string(a.train_per_class + a.test_per_class) +
                     " reviews in a class; using an 80/20 split per class (" + std::to_string(split.train.size()) +
                     " train, " + std::to_string(split.test.size()) + " test)");
            std::vector<int> pred;
            EvalReport r = evaluate_reviews(split.train, split.test, *feats.source, {}, &pred);
            r.split_seed = a.split_seed;
            for (std::size_t i = 0; i < split.test.size(); ++i) {
                truth.push_back(split.test[i].label);
                predicted.push_back(pred[i]);
            }
            oov += r.oov_dropped;
            all_oov += r.all_oov_reviews;
            nlohmann::json j = r.to_json();
            j["proportional_split"] = split.proportional;
            j["train_size"] = split.train.size();
            per_domain[name] = j;
            table << "[" << name << "]\n" << r.to_table() << '\n';

            if (!a.export_features.empty()) {
                for (const auto& [part, rows] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
                    const std::string path = a.export_features + "." + name + "." + part + ".txt";
                    std::ofstream out(path);
                    if (!out) throw std::runtime_error("cannot write '" + path + "'");
                    write_sparse_features(out, *rows, *feats.source);
                }
            }
        }
        overall = score_predictions(truth, predicted);
        overall.oov_dropped = oov;
        overall.all_oov_reviews = all_oov;
        overall.split_seed = a.split_seed;
        doc = overall.to_json();
        doc["features"] = feats.description;
        doc["domains"] = per_domain;
        table << "[overall: " << feats.description << "]\n" << overall.to_table();
    });

    std::cout << table.str();
    stage("output", [&] {
        if (a.json.empty())
            std::cout << '\n' << doc.dump(2) << '\n';
        else
            write_text_file(a.json, doc.dump(2) + "\n");
    });
    return 0;
}

// ---------------------------------------------------------------------------
// eval-lexicon

struct EvalLexiconArgs {
    FeatureArgs features;
    std::string lexicon;
    int folds = 5;
    std::uint64_t split_seed = 1;
    std::string json;
    PreprocessArgs pre;
};

int run_eval_lexicon(const EvalLexiconArgs& a) {
    PreprocessConfig cfg = stage("config", [&] { return a.pre.build(); });
    // Lexicon terms are single words; the review-length filter does not apply.
    cfg.min_review_tokens = 1;
    LoadedFeatures feats = stage("model", [&] { return load_features(a.features, Variant::common_only); });
    Lexicon lex = stage("lexicon", [&] {
        if (!fs::exists(a.lexicon)) throw InputError("lexicon file '" + a.lexicon + "' does not exist");
        return load_lexicon_file(a.lexicon, cfg);
    });
    std::cerr << "lexicon: " << lex.positive_raw << " positive, " << lex.negative_raw << " negative entries; "
              << lex.entries.size() << " kept, " << lex.phrases_dropped << " phrases, " << lex.stopwords_dropped
              << " stopwords, " << lex.duplicates_merged << " duplicates, " << lex.conflicts_dropped
              << " conflicts dropped\n";

    EvalReport r = stage("eval", [&] {
        LexiconOptions opts;
        opts.folds = a.folds;
        opts.seed = a.split_seed;
        return evaluate_lexicon(lex, *feats.source, opts);
    });
    nlohmann::json doc = r.to_json();
    doc["features"] = feats.description;
    doc["lexicon"] = {{"positive_raw", lex.positive_raw},
                      {"negative_raw", lex.negative_raw},
                      {"kept", lex.entries.size()},
                      {"phrases_dropped", lex.phrases_dropped},
                      {"stopwords_dropped", lex.stopwords_dropped},
                      {"duplicates_merged", lex.duplicates_merged},
                      {"conflicts_dropped", lex.conflicts_dropped}};
    std::cout << "[lexicon: " << feats.description << "]\n" << r.to_table();
    stage("output", [&] {
        if (a.json.empty())
            std::cout << '\n' << doc.dump(2) << '\n';
        else
            write_text_file(a.json, doc.dump(2) + "\n");
    });
    return 0;
}

// ---------------------------------------------------------------------------
// commonality

struct CommonalityArgs {
    std::string model_dir;
    std::vector<std::string> words;
    std::size_t top = 0;
    std::size_t bottom = 0;
    bool no_stem = false;
};

int run_commonality(const CommonalityArgs& a) {
    ModelBundle b = stage("model", [&] { return load_model_dir(a.model_dir); });
    const auto& m = b.model;
    std::vector<WordId> rows;
    stage("commonality", [&] {
        if (a.words.empty() && a.top == 0 && a.bottom == 0) throw InputError("give --words or --top/--bottom");
        PreprocessConfig cfg;
        cfg.stopwords.clear();
        cfg.stem = !a.no_stem;
        for (const auto& w : a.words) {
            const auto toks = tokenize(w, cfg);
            const std::optional<WordId> id = toks.size() == 1 ? b.vocab.find(toks[0]) : std::nullopt;
            if (!id) {
                warn("'" + w + "' is not in the vocabulary");
                continue;
            }
            rows.push_back(*id);
        }
        if (a.top > 0 || a.bottom > 0) {
            std::vector<WordId> order(b.vocab.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<WordId>(i);
            std::stable_sort(order.begin(), order.end(), [&](WordId x, WordId y) {
                return m.prior[static_cast<std::size_t>(x)] > m.prior[static_cast<std::size_t>(y)];
            });
            const std::size_t n = order.size();
            std::vector<bool> chosen(n, false);
            for (std::size_t i = 0; i < std::min(a.top, n); ++i) chosen[i] = true;
            for (std::size_t i = 0; i < std::min(a.bottom, n); ++i) chosen[n - 1 - i] = true;
            for (std::size_t i = 0; i < n; ++i)
                if (chosen[i]) rows.push_back(order[i]);
        }
    });
    std::cout << "word\tprior\tcount_" << m.domains[Domain::p] << "\tcount_" << m.domains[Domain::q] << '\n';
    char buf[64];
    for (WordId id : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", m.prior[static_cast<std::size_t>(id)]);
        std::cout << b.vocab.word(id) << '\t' << buf << '\t' << b.vocab.count(id, Domain::p) << '\t'
                  << b.vocab.count(id, Domain::q) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// export / nearest / make-synthetic

struct ExportArgs {
    std::string model_dir;
    std::string variant = "dse_w";
    std::string domain = "p";
    std::string out;
};

int run_export(const ExportArgs& a) {
    ModelBundle b = stage("model", [&] { return load_model_dir(a.model_dir); });
    stage("export", [&] {
        const Variant v = parse_variant(a.variant);
        const Domain d = resolve_domain(b.model.domains, a.domain);
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + a.out + "'");
        export_embeddings(b.model, b.vocab, v, d, out);
        if (!out) throw std::runtime_error("write to '" + a.out + "' failed");
    });
    return 0;
}

struct NearestArgs {
    std::string model_dir;
    std::string word;
    std::string variant = "dse_w";
    std::string domain = "p";
    std::size_t k = 10;
};

int run_nearest(const NearestArgs& a) {
    ModelBundle b = stage("model", [&] { return load_model_dir(a.model_dir); });
    const auto result = stage("nearest", [&] {
        const Variant v = parse_variant(a.variant);
        const Domain d = resolve_domain(b.model.domains, a.domain);
        return nearest_neighbors(b.model, b.vocab, a.word, d, v, a.k);
    });
    char buf[64];
    for (const auto& n : result) {
        std::snprintf(buf, sizeof buf, "%.6f", n.cosine);
        std::cout << n.word << '\t' << buf << '\n';
    }
    return 0;
}

struct SyntheticArgs {
    std::string out;
    std::string roles;
    SyntheticOptions opts;
};

int run_make_synthetic(const SyntheticArgs& a) {
    const SyntheticCorpus c = stage("synthetic", [&] { return make_synthetic(a.opts); });
    stage("output", [&] {
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + a.out + "'");
        write_jsonl(out, c.reviews);
        if (!a.roles.empty()) write_text_file(a.roles, c.roles().dump(2) + "\n");
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-sensitive word embeddings: train, inspect and evaluate."};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "INI/TOML file of `key = value` lines; subcommand keys go under [train], [eval-reviews], ...");
    app.require_subcommand(1);
    // Lets --config follow the subcommand name.
    app.fallthrough();

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a DSE model or a skip-gram baseline");
    train_cmd->add_option("--corpus", ta.corpus, "Corpus file (JSONL or TSV); repeat for several files")->required();
    train_cmd->add_option("--domain-names", ta.domain_names, "The two domain identifiers, p first")->delimiter(',');
    train_cmd->add_option("--out", ta.out, "Output directory")->required();
    train_cmd->add_option("--mode", ta.mode, "dse or skipgram");
    train_cmd->add_option("--domains", ta.domains, "Skip-gram slice: p, q, a domain name, or both");
    train_cmd->add_option("--dim", ta.dim, "Embedding dimension");
    train_cmd->add_option("--window", ta.window, "Context window radius");
    train_cmd->add_option("--negatives", ta.negatives, "Negative samples per context word");
    train_cmd->add_option("--iters", ta.iters, "Training sweeps");
    train_cmd->add_option("--lr", ta.lr, "Initial learning rate, applied to the mean pair term of each event");
    train_cmd->add_option("--seed", ta.seed, "Random seed");
    train_cmd->add_option("--min-count", ta.min_count, "Drop words seen fewer times across both domains");
    train_cmd->add_option("--threads", ta.threads, "Worker threads; > 1 selects asynchronous parallel training");
    train_cmd->add_flag("--deterministic", ta.deterministic, "Force single-threaded bit-reproducible training");
    train_cmd->add_option("--subsample", ta.subsample, "Frequent-word subsampling threshold (0 disables)");
    train_cmd->add_flag("--quiet", ta.quiet, "No progress output");
    ta.pre.add(train_cmd);

    EvalReviewsArgs ea;
    auto* eval_cmd = app.add_subcommand("eval-reviews", "Review-level sentiment classification");
    ea.features.add(eval_cmd, true);
    eval_cmd->add_option("--labeled", ea.labeled, "Labeled review file; repeat for several files")->required();
    eval_cmd->add_option("--domain-names", ea.domain_names, "Domain identifiers when using --embeddings")
        ->delimiter(',');
    eval_cmd->add_option("--split-seed", ea.split_seed, "Seed of the train/test split");
    eval_cmd->add_option("--train-per-class", ea.train_per_class, "Training reviews per class and domain");
    eval_cmd->add_option("--test-per-class", ea.test_per_class, "Test reviews per class and domain");
    eval_cmd->add_option("--json", ea.json, "Write the JSON report here instead of stdout");
    eval_cmd->add_option("--export-features", ea.export_features,
                         "Also write sparse feature files PREFIX.<domain>.{train,test}.txt");
    ea.pre.add(eval_cmd);

    EvalLexiconArgs la;
    auto* lex_cmd = app.add_subcommand("eval-lexicon", "Cross-validated sentiment lexicon classification");
    la.features.add(lex_cmd, false);
    lex_cmd->add_option("--lexicon", la.lexicon, "word<TAB>positive|negative file")->required();
    lex_cmd->add_option("--folds", la.folds, "Cross-validation folds");
    lex_cmd->add_option("--split-seed", la.split_seed, "Seed of the fold assignment");
    lex_cmd->add_option("--json", la.json, "Write the JSON report here instead of stdout");
    la.pre.add(lex_cmd);

    CommonalityArgs ca;
    auto* com_cmd = app.add_subcommand("commonality", "Print learned p(z=1) with per-domain counts");
    com_cmd->add_option("--model-dir", ca.model_dir, "Model directory")->required();
    com_cmd->add_option("--words", ca.words, "Comma-separated words")->delimiter(',');
    com_cmd->add_option("--top", ca.top, "Most domain-common words");
    com_cmd->add_option("--bottom", ca.bottom, "Most domain-specific words");
    com_cmd->add_flag("--no-stem", ca.no_stem, "Look words up without stemming");

    ExportArgs xa;
    auto* exp_cmd = app.add_subcommand("export", "Write composed vectors as a text embedding file");
    exp_cmd->add_option("--model-dir", xa.model_dir, "Model directory")->required();
    exp_cmd->add_option("--variant", xa.variant, "Composition: dse_w, dse_c, common or specific");
    exp_cmd->add_option("--domain", xa.domain, "Domain: p, q or a domain name");
    exp_cmd->add_option("--out", xa.out, "Output file")->required();

    NearestArgs na;
    auto* nn_cmd = app.add_subcommand("nearest", "Nearest neighbours by cosine similarity");
    nn_cmd->add_option("--model-dir", na.model_dir, "Model directory")->required();
    nn_cmd->add_option("--word", na.word, "Query word (vocabulary form)")->required();
    nn_cmd->add_option("--variant", na.variant, "Composition: dse_w, dse_c, common or specific");
    nn_cmd->add_option("--domain", na.domain, "Domain: p, q or a domain name");
    nn_cmd->add_option("-k", na.k, "Number of neighbours");

    SyntheticArgs sa;
    auto* syn_cmd = app.add_subcommand("make-synthetic", "Generate the planted-structure test corpus");
    syn_cmd->group("");
    syn_cmd->add_option("--out", sa.out, "Output JSONL file")->required();
    syn_cmd->add_option("--roles", sa.roles, "Also write the word roles as JSON");
    syn_cmd->add_option("--reviews-per-domain", sa.opts.reviews_per_domain, "Reviews per domain");
    syn_cmd->add_option("--seed", sa.opts.seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error [usage]: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*train_cmd) return run_train(ta);
        if (*eval_cmd) return run_eval_reviews(ea);
        if (*lex_cmd) return run_eval_lexicon(la);
        if (*com_cmd) return run_commonality(ca);
        if (*exp_cmd) return run_export(xa);
        if (*nn_cmd) return run_nearest(na);
        if (*syn_cmd) return run_make_synthetic(sa);
    } catch (const StageError& e) {
        std::cerr << "error [" << e.stage << "]: " << e.message << '\n';
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
