#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dse/matrix.hpp"
#include "dse/model.hpp"
#include "dse/vocab.hpp"

namespace dse {

enum class TrainMode { dse, skipgram };

struct TrainConfig {
    std::size_t dim = 200;
    int window = 3;
    int negatives = 5;
    int iterations = 100;
    double learning_rate = 1.0;
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::dse;
    /// Single-threaded, bit-reproducible training. When false and threads > 1
    /// workers update parameters asynchronously.
    bool deterministic = true;
    int threads = 1;
    /// The learning rate decays linearly to learning_rate * min_lr_fraction.
    double min_lr_fraction = 1e-4;
    /// Priors are clamped to [prior_floor, 1 - prior_floor] after each sweep.
    double prior_floor = 1e-6;
    /// word2vec frequent-word subsampling threshold; 0 disables it.
    double subsample = 0.0;

    /// Throws InputError when a field is out of range.
    void validate() const;
};

/// One target-word occurrence: its label, context words, and `n` sampled
/// negatives per context word stored contiguously.
struct TrainingEvent {
    WordId target = 0;
    Domain domain = Domain::p;
    int label = 0;
    std::vector<WordId> contexts;
    std::vector<WordId> negatives;
    int negatives_per_context = 0;

    std::span<const WordId> negatives_for(std::size_t context) const {
        const auto n = static_cast<std::size_t>(negatives_per_context);
        return std::span<const WordId>(negatives).subspan(context * n, n);
    }
};

double sigmoid(double x);
/// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x);

/// Negative-sampled estimate of sum_t log p(w_t | w, z_w = branch).
/// Returns 0 for an empty context.
double log_context_likelihood(const DseModel& model, const TrainingEvent& event, Branch branch);

/// p(y | w, z_w = branch) = sigmoid(u . s) for y = 1, its complement for y = 0.
double sentiment_probability(const DseModel& model, WordId w, int y, Branch branch, Domain domain);

/// Responsibility of the common branch for this occurrence, p(z_w = 1 | w, c_w, y_w),
/// using the same negatives for both branches. Priors of exactly 0 or 1
/// short-circuit to 0 or 1.
double posterior(const DseModel& model, const TrainingEvent& event);

/// log sum_k p(z_w = k) p(y_w | w, k) exp(context estimate_k): the
/// negative-sampled log-likelihood of one occurrence.
double event_log_likelihood(const DseModel& model, const TrainingEvent& event);

/// The per-event M-step objective
///   J = gamma * [ctx(U^c) + log p(y | U^c)] + (1 - gamma) * [ctx(U^dom) + log p(y | U^dom)].
double event_objective(const DseModel& model, const TrainingEvent& event, double gamma);

/// Gradient of event_objective. Output-vector gradients are listed per
/// touched slot (contexts first, then negatives in event order), so a word
/// may appear more than once.
struct EventGradient {
    std::vector<double> common;
    std::vector<double> specific;
    std::vector<double> sentiment;
    std::vector<WordId> output_ids;
    Matrix output;
};

EventGradient event_gradient(const DseModel& model, const TrainingEvent& event, double gamma);

/// Step multiplier applied to the learning rate for one event:
/// 1 / (|contexts| * (1 + negatives_per_context)), so the configured rate
/// acts on the mean pair term rather than on their sum. 1 for an event
/// without contexts.
double step_scale(const TrainingEvent& event);

/// Ascends event_objective by one step of size `lr * step_scale(event)`.
/// Throws NumericError on a non-finite gradient. Only the specific matrix of
/// the event's domain is touched, and a branch with zero weight is left
/// unchanged.
void sgd_step(DseModel& model, const TrainingEvent& event, double gamma, double lr);

/// Per-word sums of responsibilities and occurrence counts for the prior update.
class PosteriorAccumulator {
public:
    explicit PosteriorAccumulator(std::size_t vocab_size = 0) : sums_(vocab_size, 0.0), counts_(vocab_size, 0) {}

    void add(WordId w, double gamma) {
        sums_[static_cast<std::size_t>(w)] += gamma;
        ++counts_[static_cast<std::size_t>(w)];
    }
    void merge(const PosteriorAccumulator& other);
    void clear();

    std::size_t size() const { return sums_.size(); }
    double sum(WordId w) const { return sums_[static_cast<std::size_t>(w)]; }
    std::uint64_t count(WordId w) const { return counts_[static_cast<std::size_t>(w)]; }

private:
    std::vector<double> sums_;
    std::vector<std::uint64_t> counts_;
};

/// New prior per word: the mean responsibility over its occurrences, clamped
/// to [floor, 1 - floor]. Words never seen keep `previous`.
std::vector<double> update_prior(const PosteriorAccumulator& acc, std::span<const double> previous,
                                 double floor = 0.0);

struct SweepStats {
    int sweep = 0;
    std::size_t events = 0;
    double mean_objective = 0.0;
    double mean_prior = 0.0;
    double seconds = 0.0;
};

/// `sweep<TAB>mean_objective<TAB>mean_prior<TAB>seconds`
std::string format_sweep(const SweepStats& s);

using SweepCallback = std::function<void(const SweepStats&)>;

struct TrainResult {
    DseModel model;
    std::vector<SweepStats> log;
};

/// EM with negative sampling over both domains. Each sweep visits every
/// word position in corpus order: negatives are sampled, the responsibility
/// computed and accumulated, and an SGD step taken; the priors are updated
/// once at the end of the sweep.
TrainResult train(std::span<const Review> reviews, const Vocabulary& vocab, const TrainConfig& config,
                  DomainNames domains = {}, const SweepCallback& on_sweep = {});

struct SkipGramResult {
    Matrix input;
    Matrix output;
    std::vector<SweepStats> log;
};

/// Plain skip-gram with negative sampling, optionally restricted to the
/// reviews of one domain. Shares window, negatives, learning-rate decay and
/// the per-event step scale with train().
SkipGramResult train_skipgram(std::span<const Review> reviews, const Vocabulary& vocab, const TrainConfig& config,
                              std::optional<Domain> slice = std::nullopt, const SweepCallback& on_sweep = {});

}  // namespace dse
