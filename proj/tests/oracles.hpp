#pragma once

// Reference computations written directly from the model's definitions, in
// probability space and without any of the library's numerical shortcuts.
// Tests compare the library against these.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "dse/model.hpp"
#include "dse/trainer.hpp"

namespace oracle {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double inner(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::span<const double> input_vector(const dse::DseModel& m, dse::WordId w, bool common, dse::Domain d) {
    const auto& mat = common ? m.common : m.specific[dse::index(d)];
    return mat.row(static_cast<std::size_t>(w));
}

/// Model with every parameter uniform in [-scale, scale] and priors in [0.05, 0.95].
inline dse::DseModel random_model(std::size_t vocab, std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
    dse::DseModel m = dse::init_model(vocab, dim, rng(), dse::DomainNames{{"p", "q"}});
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : m.common.data()) x = u(rng);
    for (auto& s : m.specific)
        for (double& x : s.data()) x = u(rng);
    for (double& x : m.output.data()) x = u(rng);
    for (double& x : m.sentiment) x = u(rng);
    std::uniform_real_distribution<double> pr(0.05, 0.95);
    for (double& x : m.prior) x = pr(rng);
    return m;
}

inline dse::TrainingEvent random_event(std::size_t vocab, std::size_t n_contexts, int negatives, std::mt19937_64& rng) {
    std::uniform_int_distribution<dse::WordId> word(0, static_cast<dse::WordId>(vocab - 1));
    dse::TrainingEvent e;
    e.target = word(rng);
    e.domain = rng() % 2 == 0 ? dse::Domain::p : dse::Domain::q;
    e.label = static_cast<int>(rng() % 2);
    e.negatives_per_context = negatives;
    for (std::size_t i = 0; i < n_contexts; ++i) e.contexts.push_back(word(rng));
    for (std::size_t i = 0; i < n_contexts * static_cast<std::size_t>(negatives); ++i) e.negatives.push_back(word(rng));
    return e;
}

/// p(y | u) from the sentiment boundary.
inline double p_label(const dse::DseModel& m, std::span<const double> u, int y) {
    const double p1 = logistic(inner(u, m.sentiment));
    return y == 1 ? p1 : 1.0 - p1;
}

/// Full softmax p(t | u) over the whole vocabulary.
inline double p_context(const dse::DseModel& m, std::span<const double> u, dse::WordId t) {
    double z = 0.0;
    for (std::size_t j = 0; j < m.output.rows(); ++j) z += std::exp(inner(u, m.output.row(j)));
    return std::exp(inner(u, m.output.row(static_cast<std::size_t>(t)))) / z;
}

/// p(z, y, contexts | w) for one occurrence under the full softmax.
inline double occurrence_joint(const dse::DseModel& m, dse::WordId w, std::span<const dse::WordId> ctx, int y,
                               dse::Domain d, bool common) {
    const double pi = m.prior[static_cast<std::size_t>(w)];
    const auto u = input_vector(m, w, common, d);
    double p = (common ? pi : 1.0 - pi) * p_label(m, u, y);
    for (dse::WordId t : ctx) p *= p_context(m, u, t);
    return p;
}

/// Posterior of z = 1 at `position` by enumerating all 2^L joint assignments
/// of the review's latent variables and marginalizing.
inline double enumerated_posterior(const dse::DseModel& m, std::span<const dse::WordId> tokens, int label,
                                   dse::Domain d, int window, std::size_t position) {
    const std::size_t L = tokens.size();
    std::vector<std::vector<dse::WordId>> ctx(L);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) {
            const auto dist = i > j ? i - j : j - i;
            if (dist >= 1 && dist <= static_cast<std::size_t>(window)) ctx[i].push_back(tokens[j]);
        }
    std::vector<std::array<double, 2>> factor(L);
    for (std::size_t i = 0; i < L; ++i) {
        factor[i][0] = occurrence_joint(m, tokens[i], ctx[i], label, d, false);
        factor[i][1] = occurrence_joint(m, tokens[i], ctx[i], label, d, true);
    }
    double num = 0.0, den = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << L); ++mask) {
        double p = 1.0;
        for (std::size_t i = 0; i < L; ++i) p *= factor[i][(mask >> i) & 1];
        den += p;
        if ((mask >> position) & 1) num += p;
    }
    return num / den;
}

/// Negative-sampled log-likelihood of the contexts for one branch, straight
/// from the formula.
inline double sampled_context(const dse::DseModel& m, const dse::TrainingEvent& e, bool common) {
    const auto u = input_vector(m, e.target, common, e.domain);
    double total = 0.0;
    for (std::size_t i = 0; i < e.contexts.size(); ++i) {
        total += std::log(logistic(inner(u, m.output.row(static_cast<std::size_t>(e.contexts[i])))));
        for (dse::WordId n : e.negatives_for(i))
            total += std::log(logistic(-inner(u, m.output.row(static_cast<std::size_t>(n)))));
    }
    return total;
}

/// gamma * [ctx + sent](common) + (1 - gamma) * [ctx + sent](specific)
inline double sampled_objective(const dse::DseModel& m, const dse::TrainingEvent& e, double gamma) {
    auto branch = [&](bool common) {
        const auto u = input_vector(m, e.target, common, e.domain);
        return sampled_context(m, e, common) + std::log(p_label(m, u, e.label));
    };
    return gamma * branch(true) + (1.0 - gamma) * branch(false);
}

/// Responsibility with sampled context likelihoods, in probability space.
inline double sampled_posterior(const dse::DseModel& m, const dse::TrainingEvent& e) {
    const double pi = m.prior[static_cast<std::size_t>(e.target)];
    const double a =
        pi * p_label(m, input_vector(m, e.target, true, e.domain), e.label) * std::exp(sampled_context(m, e, true));
    const double b = (1.0 - pi) * p_label(m, input_vector(m, e.target, false, e.domain), e.label) *
                     std::exp(sampled_context(m, e, false));
    return a / (a + b);
}

/// One analytic-vs-numeric comparison.
struct GradientCheck {
    std::size_t compared = 0;
    double worst_relative = 0.0;
};

inline double relative_error(double analytic, double numeric) {
    // Components smaller than the floor are compared on an absolute scale.
    constexpr double kFloor = 1e-4;
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

/// Central differences of sampled_objective for every parameter the event
/// touches, against dse::event_gradient.
inline GradientCheck check_event_gradient(const dse::DseModel& model, const dse::TrainingEvent& e, double gamma,
                                          double eps) {
    const dse::EventGradient g = dse::event_gradient(model, e, gamma);
    GradientCheck out;
    dse::DseModel m = model;
    auto numeric = [&](double& param) {
        const double saved = param;
        param = saved + eps;
        const double up = sampled_objective(m, e, gamma);
        param = saved - eps;
        const double down = sampled_objective(m, e, gamma);
        param = saved;
        return (up - down) / (2.0 * eps);
    };
    auto compare = [&](double analytic, double num) {
        ++out.compared;
        out.worst_relative = std::max(out.worst_relative, relative_error(analytic, num));
    };
    const std::size_t d = m.dim;
    const auto w = static_cast<std::size_t>(e.target);
    const dse::Domain other = e.domain == dse::Domain::p ? dse::Domain::q : dse::Domain::p;
    for (std::size_t i = 0; i < d; ++i) {
        compare(g.common[i], numeric(m.common.row(w)[i]));
        compare(g.specific[i], numeric(m.specific[dse::index(e.domain)].row(w)[i]));
        // The other domain's matrix is not part of the objective.
        compare(0.0, numeric(m.specific[dse::index(other)].row(w)[i]));
        compare(g.sentiment[i], numeric(m.sentiment[i]));
    }
    // Slot gradients summed per output row.
    std::map<dse::WordId, std::vector<double>> rows;
    for (std::size_t slot = 0; slot < g.output_ids.size(); ++slot) {
        auto& r = rows[g.output_ids[slot]];
        r.resize(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) r[i] += g.output.row(slot)[i];
    }
    for (const auto& [id, r] : rows)
        for (std::size_t i = 0; i < d; ++i) compare(r[i], numeric(m.output.row(static_cast<std::size_t>(id))[i]));
    return out;
}

}  // namespace oracle
