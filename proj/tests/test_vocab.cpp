#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dse/synthetic.hpp"
#include "dse/vocab.hpp"

using namespace dse;

namespace {

TextReview review(Domain d, std::vector<std::string> tokens) { return {d, 1, std::move(tokens)}; }

using Ids = std::vector<WordId>;

// Pearson statistic of observed draws against expected probabilities.
double chi_square(const std::vector<std::size_t>& observed, const std::vector<double>& probs, std::size_t n) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (probs[i] == 0.0) {
            CHECK(observed[i] == 0);
            continue;
        }
        const double e = probs[i] * static_cast<double>(n);
        stat += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
    }
    return stat;
}

}  // namespace

TEST_CASE("build_vocab: ordering by count then word") {
    const std::vector<TextReview> reviews{review(Domain::p, {"apple", "good", "good"}),
                                          review(Domain::q, {"good", "apple"})};
    const auto b = build_vocab(reviews, 1);
    REQUIRE(b.vocab.size() == 2);
    CHECK(b.vocab.word(0) == "good");
    CHECK(b.vocab.word(1) == "apple");
    CHECK(b.vocab.count(0) == 3);
    CHECK(b.vocab.count(0, Domain::p) == 2);
    CHECK(b.vocab.count(0, Domain::q) == 1);
    CHECK(b.reviews[0].tokens == Ids{1, 0, 0});
}

TEST_CASE("build_vocab: ties broken lexicographically") {
    const std::vector<TextReview> reviews{review(Domain::p, {"b", "a", "b", "a"})};
    const auto b = build_vocab(reviews, 1);
    CHECK(b.vocab.word(0) == "a");
    CHECK(b.vocab.word(1) == "b");
}

TEST_CASE("build_vocab: min_count drops rare words and emptied reviews") {
    const std::vector<TextReview> reviews{review(Domain::p, {"rare"})};
    const auto b = build_vocab(reviews, 2);
    CHECK(b.vocab.empty());
    CHECK(b.dropped_tokens == 1);
    CHECK(b.dropped_reviews == 1);
    CHECK(b.reviews.empty());

    const std::vector<TextReview> mixed{review(Domain::p, {"x", "x", "y"}), review(Domain::q, {"y", "z"})};
    const auto m = build_vocab(mixed, 2);
    CHECK(m.vocab.size() == 2);
    CHECK_FALSE(m.vocab.find("z").has_value());
    CHECK(m.dropped_tokens == 1);
    for (std::size_t i = 0; i < m.vocab.size(); ++i)
        CHECK(m.vocab.count(static_cast<WordId>(i)) >= 2);
}

TEST_CASE("build_vocab: errors") {
    CHECK_THROWS_AS(build_vocab({}, 1), InputError);
    const std::vector<TextReview> reviews{review(Domain::p, {"a"})};
    CHECK_THROWS_AS(build_vocab(reviews, 0), InputError);
}

TEST_CASE("build_vocab: deterministic and count-conserving on a synthetic corpus") {
    SyntheticOptions opts;
    opts.reviews_per_domain = 200;
    const auto syn = make_synthetic(opts);
    std::vector<TextReview> reviews;
    PreprocessConfig cfg;
    cfg.min_review_tokens = 1;
    for (const auto& r : syn.reviews)
        reviews.push_back({opts.domains.resolve(r.domain), *r.label, tokenize(r.text, cfg)});
    const auto a = build_vocab(reviews, 5);
    const auto b = build_vocab(reviews, 5);
    CHECK(a.vocab == b.vocab);

    std::uint64_t kept = 0;
    for (const auto& r : a.reviews) kept += r.tokens.size();
    CHECK(a.vocab.total_tokens() == kept);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < a.vocab.size(); ++i) {
        const auto id = static_cast<WordId>(i);
        CHECK(a.vocab.count(id) == a.vocab.count(id, Domain::p) + a.vocab.count(id, Domain::q));
        CHECK(a.vocab.find(a.vocab.word(id)) == id);
        sum += a.vocab.count(id);
    }
    CHECK(sum == kept);
}

TEST_CASE("vocabulary dump roundtrip") {
    const std::vector<TextReview> reviews{review(Domain::p, {"good", "good", "bad"}), review(Domain::q, {"bad"})};
    const auto b = build_vocab(reviews, 1);
    std::stringstream ss;
    b.vocab.write(ss);
    const std::string text = ss.str();
    CHECK(text.starts_with("DSE-VOCAB v1 2 1\n"));
    CHECK(text.find("bad\t1\t1\n") != std::string::npos);
    CHECK(Vocabulary::read(ss) == b.vocab);

    std::istringstream bad("DSE-VOCAB v1 3 1\nbad\t1\t1\n");
    CHECK_THROWS_AS(Vocabulary::read(bad), InputError);
}

TEST_CASE("map_review skips and counts OOV tokens") {
    const std::vector<TextReview> reviews{review(Domain::p, {"good", "bad"})};
    const auto b = build_vocab(reviews, 1);
    std::size_t oov = 0;
    const auto r = map_review(review(Domain::q, {"good", "nope", "bad", "nah"}), b.vocab, &oov);
    CHECK(oov == 2);
    CHECK(r.tokens.size() == 2);
    CHECK(r.domain == Domain::q);
}

TEST_CASE("negative sampler: closed-form probabilities") {
    const std::vector<std::uint64_t> counts{8, 1};
    NegativeSampler s(counts, 1);
    const double expected = std::pow(8.0, 0.75) / (std::pow(8.0, 0.75) + 1.0);
    CHECK(s.probability(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.probability(0) == doctest::Approx(0.8263).epsilon(1e-4));
    CHECK(s.probability(0) + s.probability(1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("negative sampler: exclusion leaves a single candidate") {
    const std::vector<std::uint64_t> counts{8, 1};
    NegativeSampler s(counts, 3);
    for (int i = 0; i < 1000; ++i) {
        CHECK(s.sample(0) == 1);
        CHECK(s.sample(1) == 0);
    }
}

TEST_CASE("negative sampler: fewer than two words is an error") {
    const std::vector<std::uint64_t> counts{4};
    NegativeSampler s(counts, 1);
    CHECK_THROWS_AS(s.sample(0), InputError);
    CHECK_THROWS_AS(NegativeSampler(std::vector<std::uint64_t>{}, 1), InputError);
}

TEST_CASE("negative sampler: empirical frequencies pass chi-square at 0.01") {
    const std::vector<std::uint64_t> counts{50, 20, 9, 5, 3, 1};
    constexpr std::size_t kDraws = 100000;
    // Upper 1% points of chi-square with 5 and 4 degrees of freedom.
    constexpr double kCritical5 = 15.086;
    constexpr double kCritical4 = 13.277;

    std::vector<double> probs;
    double z = 0.0;
    for (auto c : counts) z += std::pow(static_cast<double>(c), 0.75);
    for (auto c : counts) probs.push_back(std::pow(static_cast<double>(c), 0.75) / z);

    NegativeSampler s(counts, 11);
    for (std::size_t i = 0; i < counts.size(); ++i)
        CHECK(s.probability(static_cast<WordId>(i)) == doctest::Approx(probs[i]).epsilon(1e-12));

    std::vector<std::size_t> observed(counts.size(), 0);
    for (std::size_t i = 0; i < kDraws; ++i) ++observed[static_cast<std::size_t>(s.sample())];
    CHECK(chi_square(observed, probs, kDraws) < kCritical5);

    // With word 0 excluded the rest are renormalized.
    std::vector<double> renorm = probs;
    renorm[0] = 0.0;
    const double rest = 1.0 - probs[0];
    for (double& p : renorm) p /= rest;
    std::fill(observed.begin(), observed.end(), 0);
    for (std::size_t i = 0; i < kDraws; ++i) ++observed[static_cast<std::size_t>(s.sample(0))];
    CHECK(chi_square(observed, renorm, kDraws) < kCritical4);
}

TEST_CASE("negative sampler is deterministic in its seed") {
    const std::vector<std::uint64_t> counts{5, 4, 3, 2, 1};
    NegativeSampler a(counts, 42), b(counts, 42);
    for (int i = 0; i < 500; ++i) CHECK(a.sample(2) == b.sample(2));
}

TEST_CASE("context_window") {
    const Ids tokens{0, 1, 2, 3, 4};
    CHECK(context_window(tokens, 2, 3) == Ids{0, 1, 3, 4});
    CHECK(context_window(Ids{7}, 0, 3).empty());
    CHECK(context_window(tokens, 0, 1) == Ids{1});
    CHECK(context_window(tokens, 4, 2) == Ids{2, 3});
    CHECK(context_window(Ids{5, 5, 5}, 1, 1) == Ids{5, 5});
}

TEST_CASE("keep_probability") {
    const std::vector<TextReview> reviews{review(Domain::p, {"a", "a", "a", "b"})};
    const auto b = build_vocab(reviews, 1);
    CHECK(keep_probability(b.vocab, 0, 0.0) == 1.0);
    const double t = 0.1;
    const double f = 0.75;
    CHECK(keep_probability(b.vocab, 0, t) == doctest::Approx(std::min(1.0, std::sqrt(t / f) + t / f)));
}
