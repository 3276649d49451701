#include <doctest.h>

#include <random>
#include <vector>

#include "dse/exact.hpp"
#include "dse/trainer.hpp"
#include "oracles.hpp"

using namespace dse;

namespace {

constexpr double kPosteriorTol = 1e-12;
constexpr double kMonotoneSlack = 1e-9;

std::vector<Review> tiny_corpus() {
    // 2 domains x 4 reviews, at most 8 tokens, vocabulary of 6.
    return {
        {Domain::p, 1, {0, 1, 2, 0, 3}},    {Domain::p, 1, {1, 0, 4, 2, 0, 1}},
        {Domain::p, 0, {5, 3, 2, 5}},       {Domain::p, 0, {3, 5, 1, 2, 5, 3, 4}},
        {Domain::q, 1, {0, 4, 1, 4, 2}},    {Domain::q, 1, {4, 0, 2, 1, 4, 0, 3, 2}},
        {Domain::q, 0, {5, 2, 3, 0, 5}},    {Domain::q, 0, {2, 5, 3, 5, 1}},
    };
}

}  // namespace

TEST_CASE("exact posterior matches brute-force enumeration") {
    std::mt19937_64 rng(31);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t vocab = 2 + rng() % 5;
        const auto m = oracle::random_model(vocab, 2, rng, 1.5);
        const std::size_t len = 1 + rng() % 6;
        std::vector<WordId> tokens;
        for (std::size_t i = 0; i < len; ++i) tokens.push_back(static_cast<WordId>(rng() % vocab));
        const int label = static_cast<int>(rng() % 2);
        const Domain d = rng() % 2 ? Domain::p : Domain::q;
        const int window = static_cast<int>(len);
        for (std::size_t pos = 0; pos < len; ++pos) {
            const auto ctx = context_window(tokens, pos, window);
            const double got = exact::posterior(m, tokens[pos], ctx, label, d);
            const double want = oracle::enumerated_posterior(m, tokens, label, d, window, pos);
            worst = std::max(worst, std::abs(got - want));
        }
    }
    CHECK(worst <= kPosteriorTol);
}

TEST_CASE("exact log context probability matches the full softmax") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = oracle::random_model(6, 3, rng, 2.0);
        const std::vector<WordId> ctx{static_cast<WordId>(rng() % 6), static_cast<WordId>(rng() % 6)};
        for (Branch b : {Branch::common, Branch::specific}) {
            const auto u = m.input(1, b, Domain::q);
            const double want = std::log(oracle::p_context(m, u, ctx[0]) * oracle::p_context(m, u, ctx[1]));
            CHECK(exact::log_context_prob(m, 1, ctx, b, Domain::q) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("exact e_step covers every position in corpus order") {
    std::mt19937_64 rng(33);
    const auto m = oracle::random_model(6, 2, rng);
    const auto corpus = tiny_corpus();
    const auto g = exact::e_step(m, corpus, 3);
    std::size_t n = 0;
    for (const auto& r : corpus) n += r.tokens.size();
    REQUIRE(g.size() == n);
    const auto& r = corpus[1];
    const auto ctx = context_window(r.tokens, 2, 3);
    CHECK(g[5 + 2] == exact::posterior(m, r.tokens[2], ctx, r.label, r.domain));
}

TEST_CASE("EM on the full-softmax path never decreases the likelihood") {
    const auto corpus = tiny_corpus();
    for (std::uint64_t seed : {1, 2, 3}) {
        std::mt19937_64 rng(seed);
        auto m = oracle::random_model(6, 2, rng, 0.5);
        double last = exact::log_likelihood(m, corpus, 3);
        for (int iter = 0; iter < 5; ++iter) {
            const auto gammas = exact::e_step(m, corpus, 3);
            const auto report = exact::m_step(m, corpus, 3, gammas);
            CHECK(report.q_after >= report.q_before);
            const double now = exact::log_likelihood(m, corpus, 3);
            CHECK(now >= last - kMonotoneSlack);
            last = now;
        }
        CHECK_NOTHROW(m.check_invariants());
    }
}
