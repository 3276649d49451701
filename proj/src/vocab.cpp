#include "dse/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace dse {

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts_p,
                       std::vector<std::uint64_t> counts_q, int min_count)
    : words_(std::move(words)), counts_{std::move(counts_p), std::move(counts_q)}, min_count_(min_count) {
    if (counts_[0].size() != words_.size() || counts_[1].size() != words_.size())
        throw InputError("vocabulary count arrays do not match the word list");
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!index_.emplace(words_[i], static_cast<WordId>(i)).second)
            throw InputError("duplicate vocabulary word '" + words_[i] + "'");
    }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t Vocabulary::total_tokens() const {
    std::uint64_t n = 0;
    for (const auto& c : counts_)
        for (auto v : c) n += v;
    return n;
}

void Vocabulary::write(std::ostream& out) const {
    out << "DSE-VOCAB v1 " << words_.size() << ' ' << min_count_ << '\n';
    for (std::size_t i = 0; i < words_.size(); ++i)
        out << words_[i] << '\t' << counts_[0][i] << '\t' << counts_[1][i] << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("vocabulary file is empty");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t size = 0;
    int min_count = 0;
    if (!(header >> magic >> version >> size >> min_count) || magic != "DSE-VOCAB" || version != "v1")
        throw InputError("not a DSE-VOCAB v1 file");

    std::vector<std::string> words;
    std::vector<std::uint64_t> cp, cq;
    words.reserve(size);
    while (words.size() < size && std::getline(in, line)) {
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw InputError("vocabulary line " + std::to_string(words.size() + 2) + " is malformed");
        words.push_back(line.substr(0, t1));
        try {
            cp.push_back(std::stoull(line.substr(t1 + 1, t2 - t1 - 1)));
            cq.push_back(std::stoull(line.substr(t2 + 1)));
        } catch (const std::exception&) {
            throw InputError("vocabulary line " + std::to_string(words.size() + 1) + " has bad counts");
        }
    }
    if (words.size() != size) throw InputError("vocabulary file is truncated");
    return Vocabulary(std::move(words), std::move(cp), std::move(cq), min_count);
}

VocabBuild build_vocab(std::span<const TextReview> reviews, int min_count) {
    if (reviews.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
    if (min_count < 1) throw InputError("min-count must be >= 1");

    std::map<std::string, std::array<std::uint64_t, 2>, std::less<>> counts;
    for (const auto& r : reviews)
        for (const auto& t : r.tokens) ++counts[t][index(r.domain)];

    std::vector<std::pair<std::string, std::array<std::uint64_t, 2>>> kept;
    for (auto& [word, c] : counts)
        if (c[0] + c[1] >= static_cast<std::uint64_t>(min_count)) kept.emplace_back(word, c);
    // std::map iteration is lexicographic, so a stable sort on count alone
    // leaves ties in lexicographic order.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second[0] + a.second[1] > b.second[0] + b.second[1]; });

    std::vector<std::string> words;
    std::vector<std::uint64_t> cp, cq;
    for (auto& [w, c] : kept) {
        words.push_back(w);
        cp.push_back(c[0]);
        cq.push_back(c[1]);
    }

    VocabBuild out;
    out.vocab = Vocabulary(std::move(words), std::move(cp), std::move(cq), min_count);
    for (const auto& r : reviews) {
        std::size_t oov = 0;
        Review mapped = map_review(r, out.vocab, &oov);
        out.dropped_tokens += oov;
        if (mapped.tokens.empty()) {
            ++out.dropped_reviews;
            continue;
        }
        out.reviews.push_back(std::move(mapped));
    }
    return out;
}

Review map_review(const TextReview& review, const Vocabulary& vocab, std::size_t* oov) {
    Review out{review.domain, review.label, {}};
    out.tokens.reserve(review.tokens.size());
    std::size_t missing = 0;
    for (const auto& t : review.tokens) {
        if (auto id = vocab.find(t)) {
            out.tokens.push_back(*id);
        } else {
            ++missing;
        }
    }
    if (oov) *oov = missing;
    return out;
}

namespace {

std::vector<double> unigram_power(std::span<const std::uint64_t> counts, double power) {
    std::vector<double> w(counts.size());
    double z = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        w[i] = std::pow(static_cast<double>(counts[i]), power);
        z += w[i];
    }
    if (z > 0.0)
        for (auto& v : w) v /= z;
    return w;
}

std::vector<std::uint64_t> total_counts(const Vocabulary& vocab) {
    std::vector<std::uint64_t> c(vocab.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = vocab.count(static_cast<WordId>(i));
    return c;
}

}  // namespace

NegativeSampler::NegativeSampler(const Vocabulary& vocab, std::uint64_t seed, double power)
    : NegativeSampler(total_counts(vocab), seed, power) {}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, std::uint64_t seed, double power)
    : probs_(unigram_power(counts, power)), dist_(probs_.begin(), probs_.end()), rng_(seed) {
    if (probs_.empty()) throw InputError("negative sampler needs a nonempty vocabulary");
}

WordId NegativeSampler::sample(WordId exclude) {
    if (probs_.size() < 2) throw InputError("negative sampling needs at least two vocabulary words");
    while (true) {
        const WordId w = dist_(rng_);
        if (w != exclude) return w;
    }
}

void context_window(std::span<const WordId> tokens, std::size_t position, int window, std::vector<WordId>& out) {
    out.clear();
    const std::size_t w = static_cast<std::size_t>(std::max(window, 0));
    const std::size_t lo = position >= w ? position - w : 0;
    const std::size_t hi = std::min(tokens.size(), position + w + 1);
    for (std::size_t i = lo; i < hi; ++i)
        if (i != position) out.push_back(tokens[i]);
}

std::vector<WordId> context_window(std::span<const WordId> tokens, std::size_t position, int window) {
    std::vector<WordId> out;
    context_window(tokens, position, window, out);
    return out;
}

double keep_probability(const Vocabulary& vocab, WordId id, double t) {
    if (t <= 0.0) return 1.0;
    const double f = static_cast<double>(vocab.count(id)) / static_cast<double>(vocab.total_tokens());
    return std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
}

}  // namespace dse
