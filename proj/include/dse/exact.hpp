#pragma once

#include <span>
#include <vector>

#include "dse/model.hpp"
#include "dse/vocab.hpp"

/// Full-softmax versions of the DSE likelihood, posterior and M-step.
///
/// Cost is linear in the vocabulary per context word, so this path is only
/// meant for small instances: it is the reference the negative-sampled
/// trainer is checked against, and it runs EM in full batch.
namespace dse::exact {

/// sum over c_w of log softmax_{w'}(u . V_{w'}) evaluated at each context word.
double log_context_prob(const DseModel& model, WordId w, std::span<const WordId> contexts, Branch branch,
                        Domain domain);

/// p(z_w = 1 | w, c_w, y_w) with the context probabilities in full softmax.
double posterior(const DseModel& model, WordId w, std::span<const WordId> contexts, int label, Domain domain);

/// Total log-likelihood of the corpus, summing over every word position
/// log sum_k p(z_w = k) p(y_w | w, k) prod_t p(w_t | w, k).
double log_likelihood(const DseModel& model, std::span<const Review> reviews, int window);

/// Responsibilities for every word position, in corpus order.
std::vector<double> e_step(const DseModel& model, std::span<const Review> reviews, int window);

/// Expected complete-data log-likelihood given fixed responsibilities,
/// including the prior term.
double q_function(const DseModel& model, std::span<const Review> reviews, int window,
                  std::span<const double> gammas);

struct MStepOptions {
    int max_iterations = 2000;
    /// Stop once the squared gradient norm falls below this.
    double gradient_tolerance = 1e-20;
};

struct MStepReport {
    int iterations = 0;
    double q_before = 0.0;
    double q_after = 0.0;
    double gradient_norm = 0.0;
};

/// Closed-form prior update followed by gradient ascent with backtracking
/// line search on the embedding part of Q. Every accepted step increases Q.
MStepReport m_step(DseModel& model, std::span<const Review> reviews, int window, std::span<const double> gammas,
                   const MStepOptions& options = {});

}  // namespace dse::exact
