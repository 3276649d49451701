#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dse/common.hpp"
#include "dse/corpus.hpp"

namespace dse {

/// Generator settings for a two-domain review corpus with planted word roles:
///
///  - common-positive / common-negative words carry the same polarity in
///    both domains;
///  - flipped words appear in positive reviews of p and negative reviews of q,
///    flanked by words exclusive to the review's domain, so both their
///    polarity and their contexts change with the domain;
///  - exclusive words occur in only one domain, independent of the label;
///  - filler words occur everywhere, independent of the label.
///
/// A review is a run of filler words with a few cue words (sentiment or
/// exclusive) dropped in, each cue separated from the next by at least
/// `min_gap` fillers. With min_gap no smaller than the training window, a
/// cue word's contexts are filler only and so have the same distribution
/// in both domains.
struct SyntheticOptions {
    std::size_t reviews_per_domain = 2000;
    std::uint64_t seed = 1;
    std::size_t common_positive = 20;
    std::size_t common_negative = 20;
    std::size_t flipped = 10;
    std::size_t exclusive_per_domain = 30;
    std::size_t filler = 200;
    int min_cues = 2;
    int max_cues = 4;
    int min_gap = 3;
    int max_gap = 5;
    /// Share of cues that are domain-exclusive words; the rest carry sentiment.
    double exclusive_rate = 0.25;
    /// Of the sentiment cues, the share offered to flipped words.
    double flipped_share = 0.5;
    /// Exclusive words placed directly on each side of a flipped word.
    int flipped_companions = 2;
    /// Probability that a sentiment cue uses the opposite polarity.
    double polarity_noise = 0.15;
    DomainNames domains{{"alpha", "beta"}};
};

struct SyntheticCorpus {
    std::vector<RawReview> reviews;
    std::vector<std::string> common_positive;
    std::vector<std::string> common_negative;
    std::vector<std::string> flipped;
    std::vector<std::string> exclusive_p;
    std::vector<std::string> exclusive_q;
    std::vector<std::string> filler;

    /// Word lists keyed by role.
    nlohmann::json roles() const;
};

/// Deterministic in options.seed. Every generated word is lowercase ASCII,
/// not a stopword and a fixed point of the Porter stemmer, so it survives
/// preprocessing unchanged. Word identities do not depend on the seed.
SyntheticCorpus make_synthetic(const SyntheticOptions& options);

/// One JSON object per review with domain, label and text.
void write_jsonl(std::ostream& out, std::span<const RawReview> reviews);

}  // namespace dse
