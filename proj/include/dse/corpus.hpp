#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dse/common.hpp"

namespace dse {

/// Version tag of the stopword list compiled into the library.
inline constexpr std::string_view kStopwordListVersion = "en-v1";

/// The shipped English stopword list (apostrophes already removed, so
/// "don't" appears as "dont").
const std::unordered_set<std::string>& default_stopwords();

struct PreprocessConfig {
    std::unordered_set<std::string> stopwords = default_stopwords();
    int min_review_tokens = 5;
    bool lowercase = true;
    bool stem = true;

    /// Throws InputError when min_review_tokens < 1.
    void validate() const;
};

/// A review as read from disk, before preprocessing.
struct RawReview {
    std::string domain;
    std::optional<double> rating;
    std::optional<int> label;
    std::string text;
};

/// A labeled, preprocessed review whose tokens are still surface strings.
/// Mapping onto vocabulary ids happens in build_vocab.
struct TextReview {
    Domain domain = Domain::p;
    int label = 0;
    std::vector<std::string> tokens;
};

/// Binary sentiment from a star rating: > 3 is positive, < 3 negative and
/// exactly 3 has no label. Throws InputError outside [1, 5].
std::optional<int> derive_label(double rating);

/// Strips punctuation, splits on whitespace, lowercases, removes stopwords
/// and stems, in that order. Apostrophes are deleted in place ("don't" ->
/// "dont"); so is all other punctuation. Only all-ASCII-letter tokens are
/// stemmed.
std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& cfg);

enum class CorpusFormat { detect, jsonl, tsv };

struct CorpusStats {
    std::size_t lines = 0;
    std::size_t kept = 0;
    std::size_t dropped_neutral = 0;
    std::size_t dropped_short = 0;
    std::size_t dropped_blank = 0;

    std::size_t dropped() const { return dropped_neutral + dropped_short + dropped_blank; }
    CorpusStats& operator+=(const CorpusStats& o);
};

struct Corpus {
    DomainNames domains;
    std::vector<TextReview> reviews;
    CorpusStats stats;

    std::size_t count(Domain d) const;
};

struct LoadOptions {
    /// Configured domain identifiers. An empty slot is filled by the first
    /// unseen tag in the data; once both are set any other tag is an error.
    DomainNames domains;
    CorpusFormat format = CorpusFormat::detect;
};

/// Parses one line of the corpus file. Returns nullopt for a blank line and
/// throws InputError on malformed input (without a line number).
std::optional<RawReview> parse_corpus_line(std::string_view line, CorpusFormat format);

/// Reads, labels, tokenizes and length-filters every line. Errors carry the
/// 1-based line number.
Corpus load_corpus(std::istream& in, const PreprocessConfig& cfg, const LoadOptions& opts = {});
Corpus load_corpus_file(const std::filesystem::path& path, const PreprocessConfig& cfg,
                        const LoadOptions& opts = {});

/// Appends `more` to `into`; both must use the same domain names (an empty
/// slot in `into` is filled from `more`).
void append_corpus(Corpus& into, Corpus&& more);

}  // namespace dse
