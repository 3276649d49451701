#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dse/common.hpp"
#include "dse/corpus.hpp"

namespace dse {

/// A labeled review over vocabulary ids.
struct Review {
    Domain domain = Domain::p;
    int label = 0;
    std::vector<WordId> tokens;
};

/// The shared vocabulary over both domains. Ids are dense and ordered by
/// descending total count, ties broken lexicographically.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Assembles a vocabulary from already-ordered entries. Throws InputError
    /// on duplicate words.
    Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts_p,
               std::vector<std::uint64_t> counts_q, int min_count);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    int min_count() const { return min_count_; }

    const std::string& word(WordId id) const { return words_.at(static_cast<std::size_t>(id)); }
    std::optional<WordId> find(std::string_view word) const;

    std::uint64_t count(WordId id) const { return count(id, Domain::p) + count(id, Domain::q); }
    std::uint64_t count(WordId id, Domain d) const { return counts_[index(d)].at(static_cast<std::size_t>(id)); }
    std::uint64_t total_tokens() const;

    /// Text dump: header `DSE-VOCAB v1 <size> <min_count>`, then one
    /// `word<TAB>count_p<TAB>count_q` line per id.
    void write(std::ostream& out) const;
    static Vocabulary read(std::istream& in);

    bool operator==(const Vocabulary& o) const {
        return words_ == o.words_ && counts_ == o.counts_ && min_count_ == o.min_count_;
    }

private:
    std::vector<std::string> words_;
    std::array<std::vector<std::uint64_t>, 2> counts_;
    std::unordered_map<std::string, WordId> index_;
    int min_count_ = 1;
};

struct VocabBuild {
    Vocabulary vocab;
    std::vector<Review> reviews;
    std::size_t dropped_tokens = 0;
    /// Reviews left with no tokens after rare-word removal.
    std::size_t dropped_reviews = 0;
};

/// Counts words over all reviews, drops those under `min_count`, assigns
/// ids and rewrites the reviews over ids. Throws InputError on an empty
/// input or min_count < 1.
VocabBuild build_vocab(std::span<const TextReview> reviews, int min_count);

/// Maps surface tokens to ids, skipping out-of-vocabulary tokens. Returns
/// the number of skipped tokens through `oov` when given.
Review map_review(const TextReview& review, const Vocabulary& vocab, std::size_t* oov = nullptr);

/// Draws negatives from P(w) proportional to count(w)^power. Each worker
/// owns its own sampler.
class NegativeSampler {
public:
    NegativeSampler(const Vocabulary& vocab, std::uint64_t seed, double power = 0.75);
    NegativeSampler(std::span<const std::uint64_t> counts, std::uint64_t seed, double power = 0.75);

    std::size_t size() const { return probs_.size(); }
    double probability(WordId id) const { return probs_.at(static_cast<std::size_t>(id)); }

    WordId sample() { return dist_(rng_); }

    /// Rejection-samples until the draw differs from `exclude`, which
    /// renormalizes P over the remaining words. Throws InputError when the
    /// vocabulary has fewer than two words.
    WordId sample(WordId exclude);

private:
    std::vector<double> probs_;
    std::discrete_distribution<WordId> dist_;
    std::mt19937_64 rng_;
};

/// Word ids at offsets -window..-1 and +1..+window around `position`,
/// truncated at the sequence ends, left side first.
void context_window(std::span<const WordId> tokens, std::size_t position, int window,
                    std::vector<WordId>& out);
std::vector<WordId> context_window(std::span<const WordId> tokens, std::size_t position, int window);

/// word2vec's frequent-word keep probability for threshold `t` (t <= 0
/// disables subsampling and returns 1).
double keep_probability(const Vocabulary& vocab, WordId id, double t);

}  // namespace dse
