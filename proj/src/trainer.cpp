#include "dse/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <thread>

namespace dse {

void TrainConfig::validate() const {
    if (dim < 1) throw InputError("dim must be >= 1");
    if (window < 1) throw InputError("window must be >= 1");
    if (negatives < 1) throw InputError("negatives must be >= 1");
    if (iterations < 1) throw InputError("iterations must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be > 0");
    if (threads < 1) throw InputError("threads must be >= 1");
    if (!(min_lr_fraction > 0.0 && min_lr_fraction <= 1.0)) throw InputError("min_lr_fraction must be in (0, 1]");
    if (!(prior_floor >= 0.0 && prior_floor < 0.5)) throw InputError("prior_floor must be in [0, 0.5)");
    if (subsample < 0.0) throw InputError("subsample threshold must be >= 0");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

namespace {

constexpr double kGradClamp = 30.0;

double sigmoid_clamped(double x) { return sigmoid(std::clamp(x, -kGradClamp, kGradClamp)); }

// Parameter rows one event reads: u for each branch, s, and one V row per
// slot (contexts first, then negatives in event order).
struct EventView {
    std::array<std::span<const double>, 2> u;  // [common, specific]
    std::span<const double> s;
    double prior = 0.5;
    std::vector<std::span<const double>> rows;
};

struct Scores {
    std::array<std::vector<double>, 2> dots;  // per branch, per slot
    std::array<double, 2> sent_dot{};
    std::array<double, 2> ctx{};
    std::array<double, 2> log_joint{};  // log pi_k + log p(y|k) + ctx_k
    double gamma = 0.5;
    double log_likelihood = 0.0;
};

constexpr std::size_t kCommon = 0;
constexpr std::size_t kSpecific = 1;

std::size_t slot_count(const TrainingEvent& e) { return e.contexts.size() + e.negatives.size(); }

void direct_view(const DseModel& m, const TrainingEvent& e, EventView& view) {
    view.u[kCommon] = m.input(e.target, Branch::common, e.domain);
    view.u[kSpecific] = m.input(e.target, Branch::specific, e.domain);
    view.s = m.sentiment;
    view.prior = m.prior[static_cast<std::size_t>(e.target)];
    view.rows.clear();
    for (WordId c : e.contexts) view.rows.push_back(m.output.row(static_cast<std::size_t>(c)));
    for (WordId n : e.negatives) view.rows.push_back(m.output.row(static_cast<std::size_t>(n)));
}

double branch_context(const TrainingEvent& e, std::span<const double> dots) {
    const std::size_t c = e.contexts.size();
    const auto n = static_cast<std::size_t>(e.negatives_per_context);
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        total += log_sigmoid(dots[i]);
        for (std::size_t j = 0; j < n; ++j) total += log_sigmoid(-dots[c + i * n + j]);
    }
    return total;
}

double log_sentiment(int y, double sent_dot) { return y == 1 ? log_sigmoid(sent_dot) : log_sigmoid(-sent_dot); }

void score_branch(const EventView& v, const TrainingEvent& e, std::size_t k, Scores& sc) {
    auto& dots = sc.dots[k];
    dots.resize(v.rows.size());
    for (std::size_t i = 0; i < v.rows.size(); ++i) dots[i] = dot(v.u[k], v.rows[i]);
    sc.sent_dot[k] = dot(v.u[k], v.s);
    sc.ctx[k] = branch_context(e, dots);
}

// E-step for one event. With a degenerate prior only the surviving branch is scored.
void score_event(const EventView& v, const TrainingEvent& e, Scores& sc) {
    if (v.prior >= 1.0 || v.prior <= 0.0) {
        const std::size_t k = v.prior >= 1.0 ? kCommon : kSpecific;
        score_branch(v, e, k, sc);
        sc.gamma = v.prior >= 1.0 ? 1.0 : 0.0;
        sc.log_likelihood = log_sentiment(e.label, sc.sent_dot[k]) + sc.ctx[k];
        return;
    }
    const std::array<double, 2> log_pi{std::log(v.prior), std::log1p(-v.prior)};
    for (std::size_t k : {kCommon, kSpecific}) {
        score_branch(v, e, k, sc);
        sc.log_joint[k] = log_pi[k] + log_sentiment(e.label, sc.sent_dot[k]) + sc.ctx[k];
    }
    const double mx = std::max(sc.log_joint[0], sc.log_joint[1]);
    const double a = std::exp(sc.log_joint[kCommon] - mx);
    const double b = std::exp(sc.log_joint[kSpecific] - mx);
    sc.gamma = a / (a + b);
    sc.log_likelihood = mx + std::log(a + b);
}

// Fills `g` with the gradient of the per-event objective. Scores must hold
// the dot products of every branch with nonzero weight.
void gradient_from_scores(const EventView& v, const TrainingEvent& e, const Scores& sc, double gamma,
                          EventGradient& g) {
    const std::size_t d = v.s.size();
    const std::size_t slots = v.rows.size();
    g.common.assign(d, 0.0);
    g.specific.assign(d, 0.0);
    g.sentiment.assign(d, 0.0);
    if (g.output.rows() != slots || g.output.cols() != d) g.output = Matrix(slots, d);
    std::fill(g.output.data().begin(), g.output.data().end(), 0.0);
    g.output_ids.clear();
    g.output_ids.insert(g.output_ids.end(), e.contexts.begin(), e.contexts.end());
    g.output_ids.insert(g.output_ids.end(), e.negatives.begin(), e.negatives.end());

    const std::size_t c = e.contexts.size();
    const std::array<double, 2> weight{gamma, 1.0 - gamma};
    for (std::size_t k : {kCommon, kSpecific}) {
        const double w = weight[k];
        if (w == 0.0) continue;
        auto gu = std::span<double>(k == kCommon ? g.common : g.specific);
        const auto u = v.u[k];
        const auto& dots = sc.dots[k];
        for (std::size_t i = 0; i < slots; ++i) {
            // Positive slots pull toward V, negative slots push away.
            const double coef = i < c ? 1.0 - sigmoid_clamped(dots[i]) : -sigmoid_clamped(dots[i]);
            axpy(w * coef, v.rows[i], gu);
            axpy(w * coef, u, g.output.row(i));
        }
        const double sent = static_cast<double>(e.label) - sigmoid_clamped(sc.sent_dot[k]);
        axpy(w * sent, v.s, gu);
        axpy(w * sent, u, g.sentiment);
    }
}

bool gradient_finite(const EventGradient& g) {
    return all_finite(g.common) && all_finite(g.specific) && all_finite(g.sentiment) && all_finite(g.output.data());
}

struct PlainAccess {
    static double load(const double& x) { return x; }
    static void add(double& x, double v) { x += v; }
};

// Lock-free updates for the asynchronous multi-worker mode.
struct AtomicAccess {
    static double load(const double& x) {
        return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
    }
    static void add(double& x, double v) {
        std::atomic_ref<double>(x).fetch_add(v, std::memory_order_relaxed);
    }
};

template <class Access>
void add_scaled(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) Access::add(y[i], alpha * x[i]);
}

template <class Access>
void apply_gradient(DseModel& m, const TrainingEvent& e, double gamma, const EventGradient& g, double lr) {
    if (gamma > 0.0) add_scaled<Access>(lr, g.common, m.input(e.target, Branch::common, e.domain));
    if (gamma < 1.0) add_scaled<Access>(lr, g.specific, m.input(e.target, Branch::specific, e.domain));
    add_scaled<Access>(lr, g.sentiment, m.sentiment);
    for (std::size_t i = 0; i < g.output_ids.size(); ++i)
        add_scaled<Access>(lr, g.output.row(i), m.output.row(static_cast<std::size_t>(g.output_ids[i])));
}

// Worker-private copy of the rows an event reads, taken through atomic loads.
struct Snapshot {
    std::array<std::vector<double>, 2> u;
    std::vector<double> s;
    Matrix rows;

    void take(const DseModel& m, const TrainingEvent& e, EventView& view) {
        const std::size_t d = m.dim;
        auto copy = [](std::span<const double> src, std::span<double> dst) {
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = AtomicAccess::load(src[i]);
        };
        for (std::size_t k : {kCommon, kSpecific}) {
            u[k].resize(d);
            copy(m.input(e.target, k == kCommon ? Branch::common : Branch::specific, e.domain), u[k]);
            view.u[k] = u[k];
        }
        s.resize(d);
        copy(m.sentiment, s);
        view.s = s;
        view.prior = m.prior[static_cast<std::size_t>(e.target)];
        const std::size_t slots = slot_count(e);
        if (rows.rows() < slots || rows.cols() != d) rows = Matrix(std::max<std::size_t>(slots, 64), d);
        view.rows.clear();
        std::size_t i = 0;
        for (WordId c : e.contexts) copy(m.output.row(static_cast<std::size_t>(c)), rows.row(i++));
        for (WordId n : e.negatives) copy(m.output.row(static_cast<std::size_t>(n)), rows.row(i++));
        for (std::size_t j = 0; j < slots; ++j) view.rows.push_back(rows.row(j));
    }
};

void fill_event(const Review& r, std::size_t pos, int window, int negatives, NegativeSampler& sampler,
                TrainingEvent& e) {
    e.target = r.tokens[pos];
    e.domain = r.domain;
    e.label = r.label;
    e.negatives_per_context = negatives;
    context_window(r.tokens, pos, window, e.contexts);
    e.negatives.clear();
    for (WordId c : e.contexts)
        for (int j = 0; j < negatives; ++j) e.negatives.push_back(sampler.sample(c));
}

std::size_t count_positions(std::span<const Review> reviews, std::optional<Domain> slice = std::nullopt) {
    std::size_t n = 0;
    for (const auto& r : reviews)
        if (!slice || r.domain == *slice) n += r.tokens.size();
    return n;
}

double decayed_lr(const TrainConfig& cfg, std::size_t done, std::size_t total) {
    const double frac = total == 0 ? 0.0 : static_cast<double>(done) / static_cast<double>(total);
    return cfg.learning_rate * std::max(cfg.min_lr_fraction, 1.0 - frac);
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void check_reviews(std::span<const Review> reviews, const Vocabulary& vocab) {
    if (reviews.empty()) throw InputError("cannot train on an empty corpus");
    if (vocab.size() < 2) throw InputError("training needs a vocabulary of at least two words");
    for (const auto& r : reviews) {
        if (r.label != 0 && r.label != 1) throw InputError("review label must be 0 or 1");
        for (WordId t : r.tokens)
            if (t < 0 || static_cast<std::size_t>(t) >= vocab.size())
                throw InputError("review token id " + std::to_string(t) + " outside the vocabulary");
    }
}

struct WorkerTotals {
    double objective = 0.0;
    std::size_t events = 0;
};

// Processes reviews [begin, end) of one sweep.
template <class Access>
WorkerTotals run_shard(DseModel& model, std::span<const Review> reviews, const Vocabulary& vocab,
                       const TrainConfig& cfg, NegativeSampler& sampler, std::mt19937_64& keep_rng,
                       PosteriorAccumulator& acc, std::atomic<std::size_t>& progress, std::size_t total_events) {
    TrainingEvent event;
    EventView view;
    Scores scores;
    EventGradient grad;
    Snapshot snap;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    WorkerTotals totals;

    for (const auto& review : reviews) {
        for (std::size_t pos = 0; pos < review.tokens.size(); ++pos) {
            const std::size_t done = progress.fetch_add(1, std::memory_order_relaxed);
            if (cfg.subsample > 0.0 && unit(keep_rng) > keep_probability(vocab, review.tokens[pos], cfg.subsample))
                continue;
            fill_event(review, pos, cfg.window, cfg.negatives, sampler, event);
            if constexpr (std::is_same_v<Access, PlainAccess>) {
                direct_view(model, event, view);
            } else {
                snap.take(model, event, view);
            }
            score_event(view, event, scores);
            acc.add(event.target, scores.gamma);
            totals.objective += scores.log_likelihood;
            ++totals.events;

            gradient_from_scores(view, event, scores, scores.gamma, grad);
            if (!gradient_finite(grad))
                throw NumericError("non-finite gradient at word '" + vocab.word(event.target) + "'");
            apply_gradient<Access>(model, event, scores.gamma, grad,
                                   decayed_lr(cfg, done, total_events) * step_scale(event));
        }
    }
    return totals;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public single-event API

double log_context_likelihood(const DseModel& model, const TrainingEvent& event, Branch branch) {
    EventView view;
    direct_view(model, event, view);
    Scores sc;
    const std::size_t k = branch == Branch::common ? kCommon : kSpecific;
    score_branch(view, event, k, sc);
    return sc.ctx[k];
}

double sentiment_probability(const DseModel& model, WordId w, int y, Branch branch, Domain domain) {
    const double p1 = sigmoid(dot(model.input(w, branch, domain), model.sentiment));
    return y == 1 ? p1 : 1.0 - p1;
}

double posterior(const DseModel& model, const TrainingEvent& event) {
    const double prior = model.prior[static_cast<std::size_t>(event.target)];
    if (prior >= 1.0) return 1.0;
    if (prior <= 0.0) return 0.0;
    EventView view;
    direct_view(model, event, view);
    Scores sc;
    score_event(view, event, sc);
    return sc.gamma;
}

double event_log_likelihood(const DseModel& model, const TrainingEvent& event) {
    EventView view;
    direct_view(model, event, view);
    Scores sc;
    score_event(view, event, sc);
    return sc.log_likelihood;
}

double event_objective(const DseModel& model, const TrainingEvent& event, double gamma) {
    double j = 0.0;
    for (Branch b : {Branch::common, Branch::specific}) {
        const double w = b == Branch::common ? gamma : 1.0 - gamma;
        if (w == 0.0) continue;
        const auto u = model.input(event.target, b, event.domain);
        const double ls = log_sentiment(event.label, dot(u, model.sentiment));
        j += w * (log_context_likelihood(model, event, b) + ls);
    }
    return j;
}

EventGradient event_gradient(const DseModel& model, const TrainingEvent& event, double gamma) {
    EventView view;
    direct_view(model, event, view);
    Scores sc;
    score_branch(view, event, kCommon, sc);
    score_branch(view, event, kSpecific, sc);
    EventGradient g;
    gradient_from_scores(view, event, sc, gamma, g);
    return g;
}

double step_scale(const TrainingEvent& event) {
    if (event.contexts.empty()) return 1.0;
    return 1.0 / (static_cast<double>(event.contexts.size()) * (1.0 + event.negatives_per_context));
}

void sgd_step(DseModel& model, const TrainingEvent& event, double gamma, double lr) {
    const EventGradient g = event_gradient(model, event, gamma);
    if (!gradient_finite(g)) throw NumericError("non-finite gradient for word id " + std::to_string(event.target));
    apply_gradient<PlainAccess>(model, event, gamma, g, lr * step_scale(event));
}

// ---------------------------------------------------------------------------
// Prior update

void PosteriorAccumulator::merge(const PosteriorAccumulator& other) {
    if (other.size() != size()) throw InputError("cannot merge accumulators of different sizes");
    for (std::size_t i = 0; i < sums_.size(); ++i) {
        sums_[i] += other.sums_[i];
        counts_[i] += other.counts_[i];
    }
}

void PosteriorAccumulator::clear() {
    std::fill(sums_.begin(), sums_.end(), 0.0);
    std::fill(counts_.begin(), counts_.end(), 0);
}

std::vector<double> update_prior(const PosteriorAccumulator& acc, std::span<const double> previous, double floor) {
    if (previous.size() != acc.size()) throw InputError("prior and accumulator sizes differ");
    std::vector<double> prior(previous.begin(), previous.end());
    for (std::size_t w = 0; w < prior.size(); ++w) {
        const auto id = static_cast<WordId>(w);
        if (acc.count(id) == 0) continue;
        const double p = acc.sum(id) / static_cast<double>(acc.count(id));
        prior[w] = std::clamp(p, floor, 1.0 - floor);
    }
    return prior;
}

std::string format_sweep(const SweepStats& s) {
    char buf[160];
    if (std::isnan(s.mean_prior)) {
        std::snprintf(buf, sizeof buf, "%d\t%.6f\tNA\t%.3f", s.sweep, s.mean_objective, s.seconds);
    } else {
        std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\t%.3f", s.sweep, s.mean_objective, s.mean_prior, s.seconds);
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Training loops

TrainResult train(std::span<const Review> reviews, const Vocabulary& vocab, const TrainConfig& cfg,
                  DomainNames domains, const SweepCallback& on_sweep) {
    cfg.validate();
    check_reviews(reviews, vocab);

    TrainResult result;
    DseModel& model = result.model;
    model = init_model(vocab, cfg.dim, cfg.seed, std::move(domains));

    const std::size_t total_events = count_positions(reviews) * static_cast<std::size_t>(cfg.iterations);
    const bool parallel = !cfg.deterministic && cfg.threads > 1;
    const std::size_t workers = parallel ? static_cast<std::size_t>(cfg.threads) : 1;

    std::vector<NegativeSampler> samplers;
    std::vector<std::mt19937_64> keep_rngs;
    std::vector<PosteriorAccumulator> accs;
    for (std::size_t w = 0; w < workers; ++w) {
        samplers.emplace_back(vocab, cfg.seed + 1 + w);
        keep_rngs.emplace_back(cfg.seed ^ (0x9e3779b97f4a7c15ULL + w));
        accs.emplace_back(vocab.size());
    }
    std::atomic<std::size_t> progress{0};

    for (int sweep = 1; sweep <= cfg.iterations; ++sweep) {
        const auto t0 = std::chrono::steady_clock::now();
        for (auto& a : accs) a.clear();
        std::vector<WorkerTotals> totals(workers);

        if (!parallel) {
            totals[0] = run_shard<PlainAccess>(model, reviews, vocab, cfg, samplers[0], keep_rngs[0], accs[0],
                                               progress, total_events);
        } else {
            std::vector<std::exception_ptr> errors(workers);
            {
                std::vector<std::jthread> pool;
                const std::size_t chunk = (reviews.size() + workers - 1) / workers;
                for (std::size_t w = 0; w < workers; ++w) {
                    const std::size_t b = std::min(reviews.size(), w * chunk);
                    const std::size_t e = std::min(reviews.size(), b + chunk);
                    pool.emplace_back([&, w, b, e] {
                        try {
                            totals[w] = run_shard<AtomicAccess>(model, reviews.subspan(b, e - b), vocab, cfg,
                                                                samplers[w], keep_rngs[w], accs[w], progress,
                                                                total_events);
                        } catch (...) {
                            errors[w] = std::current_exception();
                        }
                    });
                }
            }
            for (auto& err : errors)
                if (err) std::rethrow_exception(err);
        }

        // Per-worker partial sums are reduced once per sweep.
        PosteriorAccumulator merged(vocab.size());
        WorkerTotals sum;
        for (std::size_t w = 0; w < workers; ++w) {
            merged.merge(accs[w]);
            sum.objective += totals[w].objective;
            sum.events += totals[w].events;
        }
        model.prior = update_prior(merged, model.prior, cfg.prior_floor);
        model.check_invariants();

        SweepStats stats;
        stats.sweep = sweep;
        stats.events = sum.events;
        stats.mean_objective = sum.events ? sum.objective / static_cast<double>(sum.events) : 0.0;
        stats.mean_prior = mean(model.prior);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(stats);
        if (on_sweep) on_sweep(stats);
    }
    return result;
}

SkipGramResult train_skipgram(std::span<const Review> reviews, const Vocabulary& vocab, const TrainConfig& cfg,
                              std::optional<Domain> slice, const SweepCallback& on_sweep) {
    cfg.validate();
    check_reviews(reviews, vocab);
    const std::size_t positions = count_positions(reviews, slice);
    if (positions == 0) throw InputError("the selected corpus slice is empty");

    const std::size_t d = cfg.dim;
    SkipGramResult result;
    result.input = Matrix(vocab.size(), d);
    result.output = Matrix(vocab.size(), d);
    {
        std::mt19937_64 rng(cfg.seed);
        const double r = 0.5 / static_cast<double>(d);
        std::uniform_real_distribution<double> uni(-r, r);
        for (double& v : result.input.data()) v = uni(rng);
    }

    NegativeSampler sampler(vocab, cfg.seed + 1);
    std::mt19937_64 keep_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t total = positions * static_cast<std::size_t>(cfg.iterations);
    std::size_t done = 0;
    std::vector<WordId> contexts;
    std::vector<double> delta(d);

    for (int sweep = 1; sweep <= cfg.iterations; ++sweep) {
        const auto t0 = std::chrono::steady_clock::now();
        double objective = 0.0;
        std::size_t events = 0;
        for (const auto& review : reviews) {
            if (slice && review.domain != *slice) continue;
            for (std::size_t pos = 0; pos < review.tokens.size(); ++pos) {
                const double lr = decayed_lr(cfg, done++, total);
                const WordId target = review.tokens[pos];
                if (cfg.subsample > 0.0 && unit(keep_rng) > keep_probability(vocab, target, cfg.subsample)) continue;
                context_window(review.tokens, pos, cfg.window, contexts);
                const double step = contexts.empty()
                                        ? 0.0
                                        : lr / (static_cast<double>(contexts.size()) * (1.0 + cfg.negatives));
                auto u = result.input.row(static_cast<std::size_t>(target));
                ++events;
                for (WordId c : contexts) {
                    std::fill(delta.begin(), delta.end(), 0.0);
                    for (int j = 0; j <= cfg.negatives; ++j) {
                        const WordId o = j == 0 ? c : sampler.sample(c);
                        auto v = result.output.row(static_cast<std::size_t>(o));
                        const double f = dot(u, v);
                        objective += j == 0 ? log_sigmoid(f) : log_sigmoid(-f);
                        const double g = j == 0 ? 1.0 - sigmoid_clamped(f) : -sigmoid_clamped(f);
                        axpy(g, v, delta);
                        axpy(step * g, u, v);
                    }
                    axpy(step, delta, u);
                }
            }
        }
        if (!all_finite(result.input.data()) || !all_finite(result.output.data()))
            throw NumericError("skip-gram training diverged");

        SweepStats stats;
        stats.sweep = sweep;
        stats.events = events;
        stats.mean_objective = events ? objective / static_cast<double>(events) : 0.0;
        stats.mean_prior = std::numeric_limits<double>::quiet_NaN();
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(stats);
        if (on_sweep) on_sweep(stats);
    }
    return result;
}

}  // namespace dse
