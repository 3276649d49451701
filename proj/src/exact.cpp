#include "dse/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dse/trainer.hpp"

namespace dse::exact {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log softmax over the whole vocabulary for input vector u.
void log_softmax(const Matrix& output, std::span<const double> u, std::vector<double>& out) {
    out.resize(output.rows());
    double mx = kNegInf;
    for (std::size_t j = 0; j < output.rows(); ++j) {
        out[j] = dot(u, output.row(j));
        mx = std::max(mx, out[j]);
    }
    double z = 0.0;
    for (double v : out) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    for (double& v : out) v -= log_z;
}

double log_sentiment(std::span<const double> u, std::span<const double> s, int label) {
    const double x = dot(u, s);
    return label == 1 ? log_sigmoid(x) : log_sigmoid(-x);
}

std::array<double, 2> log_branch_joint(const DseModel& m, WordId w, std::span<const WordId> ctx, int label,
                                       Domain domain) {
    const double pi = m.prior[static_cast<std::size_t>(w)];
    std::array<double, 2> out{kNegInf, kNegInf};
    const std::array<Branch, 2> branches{Branch::common, Branch::specific};
    const std::array<double, 2> mass{pi, 1.0 - pi};
    for (std::size_t k = 0; k < 2; ++k) {
        if (mass[k] <= 0.0) continue;
        const auto u = m.input(w, branches[k], domain);
        out[k] = std::log(mass[k]) + log_sentiment(u, m.sentiment, label) + log_context_prob(m, w, ctx, branches[k], domain);
    }
    return out;
}

template <class Fn>
void for_each_position(std::span<const Review> reviews, int window, Fn&& fn) {
    std::vector<WordId> ctx;
    for (const auto& r : reviews)
        for (std::size_t pos = 0; pos < r.tokens.size(); ++pos) {
            context_window(r.tokens, pos, window, ctx);
            fn(r, r.tokens[pos], std::span<const WordId>(ctx));
        }
}

double prior_term(const DseModel& m, std::span<const Review> reviews, std::span<const double> gammas) {
    double q = 0.0;
    std::size_t i = 0;
    for (const auto& r : reviews)
        for (WordId w : r.tokens) {
            const double pi = m.prior[static_cast<std::size_t>(w)];
            const double g = gammas[i++];
            if (g > 0.0) q += g * std::log(pi);
            if (g < 1.0) q += (1.0 - g) * std::log1p(-pi);
        }
    return q;
}

// Embedding part of Q and, when `grad` is given, its gradient (stored in a
// model-shaped container; its priors are unused).
double q_embeddings(const DseModel& m, std::span<const Review> reviews, int window, std::span<const double> gammas,
                    DseModel* grad) {
    double q = 0.0;
    std::size_t i = 0;
    std::vector<double> lsm;
    const std::array<Branch, 2> branches{Branch::common, Branch::specific};
    for_each_position(reviews, window, [&](const Review& r, WordId w, std::span<const WordId> ctx) {
        const double gamma = gammas[i++];
        const std::array<double, 2> weight{gamma, 1.0 - gamma};
        for (std::size_t k = 0; k < 2; ++k) {
            if (weight[k] == 0.0) continue;
            const auto u = m.input(w, branches[k], r.domain);
            log_softmax(m.output, u, lsm);
            double ll = log_sentiment(u, m.sentiment, r.label);
            for (WordId t : ctx) ll += lsm[static_cast<std::size_t>(t)];
            q += weight[k] * ll;
            if (!grad) continue;

            auto gu = grad->input(w, branches[k], r.domain);
            const double n_ctx = static_cast<double>(ctx.size());
            for (WordId t : ctx) {
                axpy(weight[k], m.output.row(static_cast<std::size_t>(t)), gu);
                axpy(weight[k], u, grad->output.row(static_cast<std::size_t>(t)));
            }
            for (std::size_t j = 0; j < m.output.rows(); ++j) {
                const double pj = std::exp(lsm[j]);
                axpy(-weight[k] * n_ctx * pj, m.output.row(j), gu);
                axpy(-weight[k] * n_ctx * pj, u, grad->output.row(j));
            }
            const double sent = static_cast<double>(r.label) - sigmoid(dot(u, m.sentiment));
            axpy(weight[k] * sent, m.sentiment, gu);
            axpy(weight[k] * sent, u, grad->sentiment);
        }
    });
    return q;
}

template <class Fn>
void for_each_param(DseModel& m, Fn&& fn) {
    fn(m.common.data());
    fn(m.specific[0].data());
    fn(m.specific[1].data());
    fn(m.output.data());
    fn(std::span<double>(m.sentiment));
}

DseModel zero_like(const DseModel& m) {
    DseModel g;
    g.dim = m.dim;
    g.common = Matrix(m.common.rows(), m.dim);
    g.specific = {Matrix(m.common.rows(), m.dim), Matrix(m.common.rows(), m.dim)};
    g.output = Matrix(m.output.rows(), m.dim);
    g.sentiment.assign(m.dim, 0.0);
    g.prior.assign(m.prior.size(), 0.0);
    return g;
}

double squared_norm(DseModel& g) {
    double s = 0.0;
    for_each_param(g, [&](std::span<double> p) { s += dot(p, p); });
    return s;
}

// m = base + step * dir
void take_step(DseModel& m, const DseModel& base, DseModel& dir, double step) {
    std::array<std::span<double>, 5> dst{};
    std::size_t n = 0;
    for_each_param(m, [&](std::span<double> p) { dst[n++] = p; });
    std::array<std::span<const double>, 5> src{base.common.data(), base.specific[0].data(), base.specific[1].data(),
                                               base.output.data(), std::span<const double>(base.sentiment)};
    n = 0;
    for_each_param(dir, [&](std::span<double> d) {
        for (std::size_t i = 0; i < d.size(); ++i) dst[n][i] = src[n][i] + step * d[i];
        ++n;
    });
}

}  // namespace

double log_context_prob(const DseModel& model, WordId w, std::span<const WordId> contexts, Branch branch,
                        Domain domain) {
    if (contexts.empty()) return 0.0;
    std::vector<double> lsm;
    log_softmax(model.output, model.input(w, branch, domain), lsm);
    double total = 0.0;
    for (WordId t : contexts) total += lsm[static_cast<std::size_t>(t)];
    return total;
}

double posterior(const DseModel& model, WordId w, std::span<const WordId> contexts, int label, Domain domain) {
    const double pi = model.prior[static_cast<std::size_t>(w)];
    if (pi >= 1.0) return 1.0;
    if (pi <= 0.0) return 0.0;
    const auto joint = log_branch_joint(model, w, contexts, label, domain);
    return std::exp(joint[0] - log_sum_exp(joint[0], joint[1]));
}

double log_likelihood(const DseModel& model, std::span<const Review> reviews, int window) {
    double total = 0.0;
    for_each_position(reviews, window, [&](const Review& r, WordId w, std::span<const WordId> ctx) {
        const auto joint = log_branch_joint(model, w, ctx, r.label, r.domain);
        total += log_sum_exp(joint[0], joint[1]);
    });
    return total;
}

std::vector<double> e_step(const DseModel& model, std::span<const Review> reviews, int window) {
    std::vector<double> gammas;
    for_each_position(reviews, window, [&](const Review& r, WordId w, std::span<const WordId> ctx) {
        gammas.push_back(posterior(model, w, ctx, r.label, r.domain));
    });
    return gammas;
}

double q_function(const DseModel& model, std::span<const Review> reviews, int window,
                  std::span<const double> gammas) {
    return prior_term(model, reviews, gammas) + q_embeddings(model, reviews, window, gammas, nullptr);
}

MStepReport m_step(DseModel& model, std::span<const Review> reviews, int window, std::span<const double> gammas,
                   const MStepOptions& options) {
    MStepReport report;
    report.q_before = q_function(model, reviews, window, gammas);

    PosteriorAccumulator acc(model.vocab_size());
    std::size_t i = 0;
    for (const auto& r : reviews)
        for (WordId w : r.tokens) acc.add(w, gammas[i++]);
    model.prior = update_prior(acc, model.prior, 0.0);

    DseModel grad = zero_like(model);
    DseModel trial = model;
    double q = q_embeddings(model, reviews, window, gammas, nullptr);
    double step = 1.0;
    for (report.iterations = 0; report.iterations < options.max_iterations; ++report.iterations) {
        grad = zero_like(model);
        q_embeddings(model, reviews, window, gammas, &grad);
        const double g2 = squared_norm(grad);
        report.gradient_norm = std::sqrt(g2);
        if (g2 < options.gradient_tolerance) break;

        bool accepted = false;
        while (step > 1e-30) {
            take_step(trial, model, grad, step);
            const double q_new = q_embeddings(trial, reviews, window, gammas, nullptr);
            if (q_new >= q + 1e-4 * step * g2) {
                std::swap(model, trial);
                q = q_new;
                accepted = true;
                step = std::min(step * 2.0, 1e6);
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    report.q_after = q_function(model, reviews, window, gammas);
    return report;
}

}  // namespace dse::exact
