#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dse/eval.hpp"
#include "oracles.hpp"

using namespace dse;

namespace {

Vocabulary vocab_of(const std::vector<std::string>& words) {
    return Vocabulary(words, std::vector<std::uint64_t>(words.size(), 1), std::vector<std::uint64_t>(words.size(), 1),
                      1);
}

TableFeatures table(const std::vector<std::string>& words, const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    return TableFeatures(vocab_of(words), std::move(m));
}

// F1 of one class straight from the confusion counts.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    if (tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * p * r / (p + r);
}

Matrix rows_of(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    return m;
}

// Gaussian blobs around +mu and -mu in `dim` dimensions.
std::vector<TextReview> blob_reviews(std::size_t per_class, std::uint64_t seed, std::vector<std::string>& words,
                                     std::vector<std::vector<double>>& vectors) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<TextReview> out;
    for (int label : {0, 1})
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::string w = "w" + std::to_string(words.size());
            words.push_back(w);
            const double mu = label == 1 ? 1.0 : -1.0;
            vectors.push_back({mu + noise(rng), noise(rng), 0.5 * mu + noise(rng)});
            out.push_back({Domain::p, label, {w}});
        }
    return out;
}

}  // namespace

TEST_CASE("score_predictions: documented cases") {
    const std::vector<int> truth{1, 1, 0, 0};
    const auto perfect = score_predictions(truth, truth);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.macro_f1 == 1.0);

    const std::vector<int> all_pos{1, 1, 1, 1};
    const auto r = score_predictions(truth, all_pos);
    CHECK(r.accuracy == 0.5);
    CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_class[0].f1 == 0.0);
    CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_class[1].support == 2);
}

TEST_CASE("score_predictions: macro-F1 is the mean of independently recomputed class F1") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(rng() % 2);
            p[i] = static_cast<int>(rng() % 2);
        }
        std::size_t c[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t i = 0; i < n; ++i) ++c[t[i]][p[i]];
        const auto r = score_predictions(t, p);
        const double f1_pos = f1_from_counts(c[1][1], c[0][1], c[1][0]);
        const double f1_neg = f1_from_counts(c[0][0], c[1][0], c[0][1]);
        CHECK(r.per_class[1].f1 == f1_pos);
        CHECK(r.per_class[0].f1 == f1_neg);
        CHECK(r.macro_f1 == (r.per_class[0].f1 + r.per_class[1].f1) / 2.0);
        const double correct = static_cast<double>(c[0][0] + c[1][1]);
        const double wrong = static_cast<double>(c[0][1] + c[1][0]);
        CHECK(r.accuracy == correct / static_cast<double>(n));
        CHECK(r.accuracy + wrong / static_cast<double>(n) == doctest::Approx(1.0).epsilon(1e-15));
        for (const auto& m : r.per_class)
            for (double v : {m.precision, m.recall, m.f1}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }
}

TEST_CASE("report JSON uses the fixed key names") {
    const std::vector<int> truth{1, 0};
    const auto j = score_predictions(truth, truth).to_json();
    for (const char* key : {"accuracy", "macro_f1", "per_class", "folds", "oov_dropped"}) CHECK(j.contains(key));
    CHECK(j["per_class"].contains("positive"));
    CHECK(score_predictions(truth, truth).to_table().find("accuracy") != std::string::npos);
}

TEST_CASE("classifier: separable two-point set") {
    const Matrix x = rows_of({{1.0, 2.0}, {-1.0, -2.0}});
    const std::vector<int> y{1, 0};
    const auto c = train_linear_classifier(x, y);
    CHECK(c.predict(x.row(0)) == 1);
    CHECK(c.predict(x.row(1)) == 0);
}

TEST_CASE("classifier: zero features predict the majority class") {
    const Matrix x(5, 3, 0.0);
    const std::vector<int> y{1, 1, 1, 0, 0};
    const auto c = train_linear_classifier(x, y);
    for (std::size_t i = 0; i < 5; ++i) CHECK(c.predict(x.row(i)) == 1);
    const std::vector<int> y2{0, 0, 0, 1, 1};
    CHECK(train_linear_classifier(x, y2).predict(x.row(0)) == 0);
}

TEST_CASE("classifier: duplicating the data keeps the boundary direction") {
    std::vector<std::string> words;
    std::vector<std::vector<double>> vectors;
    blob_reviews(30, 5, words, vectors);
    const Matrix x = rows_of(vectors);
    std::vector<int> y;
    for (std::size_t i = 0; i < vectors.size(); ++i) y.push_back(i < 30 ? 0 : 1);
    auto doubled_rows = vectors;
    doubled_rows.insert(doubled_rows.end(), vectors.begin(), vectors.end());
    auto y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    ClassifierOptions opts;
    opts.tolerance = 1e-10;
    opts.max_iterations = 20000;
    const auto a = train_linear_classifier(x, y, opts).direction();
    const auto b = train_linear_classifier(rows_of(doubled_rows), y2, opts).direction();
    CHECK(cosine(a, b) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("classifier: single-class data is rejected") {
    const Matrix x(3, 2, 1.0);
    const std::vector<int> y{1, 1, 1};
    CHECK_THROWS_AS(train_linear_classifier(x, y), InputError);
}

TEST_CASE("classifier is deterministic") {
    std::vector<std::string> words;
    std::vector<std::vector<double>> vectors;
    blob_reviews(20, 6, words, vectors);
    std::vector<int> y;
    for (std::size_t i = 0; i < vectors.size(); ++i) y.push_back(i < 20 ? 0 : 1);
    const auto a = train_linear_classifier(rows_of(vectors), y);
    const auto b = train_linear_classifier(rows_of(vectors), y);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
}

TEST_CASE("review_features") {
    const auto f = table({"good", "bad", "anti"}, {{1.0, 2.0}, {0.5, -1.0}, {-1.0, -2.0}});
    SUBCASE("single token") {
        const auto v = review_features({Domain::p, 1, {"good"}}, f);
        CHECK(v.values == std::vector<double>{1.0, 2.0});
    }
    SUBCASE("v and -v cancel") {
        const auto v = review_features({Domain::p, 1, {"good", "anti"}}, f);
        CHECK(v.values == std::vector<double>{0.0, 0.0});
        CHECK_FALSE(v.all_oov);
    }
    SUBCASE("OOV tokens are skipped") {
        const auto v = review_features({Domain::p, 1, {"good", "zzz", "bad"}}, f);
        CHECK(v.values == std::vector<double>{0.75, 0.5});
        CHECK(v.oov_tokens == 1);
    }
    SUBCASE("all OOV") {
        const auto v = review_features({Domain::p, 1, {"zzz", "yyy"}}, f);
        CHECK(v.values == std::vector<double>{0.0, 0.0});
        CHECK(v.all_oov);
        CHECK(v.oov_tokens == 2);
    }
}

TEST_CASE("ModelFeatures compose per domain and ConcatFeatures pads") {
    std::mt19937_64 rng(42);
    const auto m = oracle::random_model(2, 3, rng);
    const auto vocab = vocab_of({"x", "y"});
    const ModelFeatures f(m, vocab, Variant::dse_w);
    std::vector<double> out(6);
    REQUIRE(f.lookup("y", Domain::q, out));
    CHECK(out == compose(m, 1, Domain::q, Variant::dse_w));
    CHECK_FALSE(f.lookup("nope", Domain::q, out));

    const ModelFeatures n(m, vocab, Variant::common_only, true);
    std::vector<double> unit(3);
    REQUIRE(n.lookup("x", Domain::p, unit));
    CHECK(norm(unit) == doctest::Approx(1.0).epsilon(1e-14));

    const auto t = table({"x"}, {{7.0}});
    const ConcatFeatures c(t, n);
    std::vector<double> both(4);
    REQUIRE(c.lookup("y", Domain::p, both));
    CHECK(both[0] == 0.0);
    CHECK_FALSE(c.lookup("nope", Domain::p, both));
}

TEST_CASE("evaluate_reviews: separable data and ordering invariance") {
    std::vector<std::string> words;
    std::vector<std::vector<double>> vectors;
    auto train = blob_reviews(60, 7, words, vectors);
    auto test = blob_reviews(40, 8, words, vectors);
    const auto f = table(words, vectors);
    std::vector<int> pred;
    const auto r = evaluate_reviews(train, test, f, {}, &pred);
    CHECK(r.accuracy > 0.75);
    CHECK(r.test_size == test.size());
    CHECK(pred.size() == test.size());

    std::mt19937_64 rng(9);
    for (int i = 0; i < 3; ++i) {
        std::shuffle(test.begin(), test.end(), rng);
        const auto s = evaluate_reviews(train, test, f);
        CHECK(s.accuracy == r.accuracy);
        CHECK(s.macro_f1 == r.macro_f1);
    }
}

TEST_CASE("split_reviews") {
    std::vector<TextReview> labeled;
    for (int i = 0; i < 30; ++i) labeled.push_back({Domain::p, i % 2, {"t" + std::to_string(i)}});
    labeled.push_back({Domain::q, 1, {"other"}});
    const auto s = split_reviews(labeled, Domain::p, 10, 5, 3);
    CHECK_FALSE(s.proportional);
    CHECK(s.train.size() == 20);
    CHECK(s.test.size() == 10);
    std::set<std::string> seen;
    for (const auto* part : {&s.train, &s.test})
        for (const auto& r : *part) {
            CHECK(r.domain == Domain::p);
            CHECK(seen.insert(r.tokens[0]).second);
        }
    const auto again = split_reviews(labeled, Domain::p, 10, 5, 3);
    CHECK(again.train.size() == s.train.size());
    for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(again.train[i].tokens == s.train[i].tokens);

    const auto small = split_reviews(labeled, Domain::p, 800, 200, 3);
    CHECK(small.proportional);
    CHECK(small.train.size() + small.test.size() == 30);
    CHECK(small.test.size() == 6);
}

TEST_CASE("write_sparse_features") {
    const auto f = table({"a", "b"}, {{0.0, 2.5}, {1.0, 0.0}});
    const std::vector<TextReview> reviews{{Domain::p, 1, {"a"}}, {Domain::p, 0, {"b"}}};
    std::ostringstream out;
    write_sparse_features(out, reviews, f);
    CHECK(out.str() == "+1 2:2.5\n-1 1:1\n");
}

TEST_CASE("load_lexicon") {
    const PreprocessConfig cfg;
    std::istringstream in("good\tpositive\nbad\tnegative\nthe\tpositive\nbattery life\tpositive\n"
                          "goods\tpositive\nrunning\tpositive\nruns\tnegative\n\n");
    const auto lex = load_lexicon(in, cfg);
    CHECK(lex.positive_raw == 5);
    CHECK(lex.negative_raw == 2);
    CHECK(lex.stopwords_dropped == 1);
    CHECK(lex.phrases_dropped == 1);
    CHECK(lex.duplicates_merged == 1);
    CHECK(lex.conflicts_dropped == 1);
    CHECK(lex.count(1) == 1);
    CHECK(lex.count(0) == 1);

    std::istringstream neutral("good\tpositive\nmeh\tneutral\n");
    CHECK_THROWS_AS(load_lexicon(neutral, cfg), InputError);
    std::istringstream notab("good positive\n");
    CHECK_THROWS_AS(load_lexicon(notab, cfg), InputError);
}

TEST_CASE("stratified_folds partition each class evenly") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng() % 60;
        std::vector<int> labels(n);
        for (auto& l : labels) l = rng() % 3 == 0 ? 1 : 0;
        const int k = 2 + static_cast<int>(rng() % 5);
        const auto folds = stratified_folds(labels, k, trial);
        REQUIRE(folds.size() == n);
        for (int c : {0, 1}) {
            std::vector<std::size_t> per(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < n; ++i)
                if (labels[i] == c) {
                    REQUIRE(folds[i] >= 0);
                    REQUIRE(folds[i] < k);
                    ++per[static_cast<std::size_t>(folds[i])];
                }
            const auto [lo, hi] = std::minmax_element(per.begin(), per.end());
            CHECK(*hi - *lo <= 1);
        }
        CHECK(stratified_folds(labels, k, trial) == folds);
    }
    CHECK_THROWS_AS(stratified_folds(std::vector<int>{0, 1}, 1, 1), InputError);
}

TEST_CASE("evaluate_lexicon") {
    std::vector<std::string> words;
    std::vector<std::vector<double>> vectors;
    const auto items = blob_reviews(20, 10, words, vectors);
    const auto f = table(words, vectors);
    Lexicon lex;
    for (const auto& r : items) lex.entries.push_back({r.tokens[0], r.label});
    lex.entries.push_back({"missing", 1});
    const auto r = evaluate_lexicon(lex, f);
    CHECK(r.oov_dropped == 1);
    CHECK(r.folds.size() == 5);
    CHECK(r.test_size == 40);
    double mean = 0.0;
    for (const auto& fold : r.folds) mean += fold.macro_f1;
    CHECK(r.macro_f1 == doctest::Approx(mean / 5.0).epsilon(1e-15));
    CHECK(r.accuracy > 0.7);

    Lexicon few;
    for (int i = 0; i < 4; ++i) few.entries.push_back({words[static_cast<std::size_t>(i)], 0});
    for (int i = 20; i < 30; ++i) few.entries.push_back({words[static_cast<std::size_t>(i)], 1});
    CHECK_THROWS_AS(evaluate_lexicon(few, f), InputError);
}

TEST_CASE("nearest_neighbors and cosine") {
    auto m = init_model(4, 2, 1);
    const std::vector<std::vector<double>> rows{{1.0, 0.0}, {2.0, 0.0}, {0.0, 1.0}, {-1.0, 0.2}};
    for (std::size_t i = 0; i < 4; ++i) std::copy(rows[i].begin(), rows[i].end(), m.common.row(i).begin());
    const auto vocab = vocab_of({"a", "b", "c", "d"});
    const auto n = nearest_neighbors(m, vocab, "a", Domain::p, Variant::common_only, 10);
    REQUIRE(n.size() == 3);
    CHECK(n[0].word == "b");
    CHECK(n[0].cosine == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(n[1].word == "c");
    CHECK(n[1].cosine == 0.0);
    CHECK(nearest_neighbors(m, vocab, "a", Domain::p, Variant::common_only, 1).size() == 1);
    CHECK_THROWS_AS(nearest_neighbors(m, vocab, "zzz", Domain::p, Variant::common_only, 1), InputError);

    const std::vector<double> x{1.0, 0.0}, y{0.0, 3.0}, z{0.0, 0.0};
    CHECK(cosine(x, y) == 0.0);
    CHECK(cosine(x, z) == 0.0);
}
