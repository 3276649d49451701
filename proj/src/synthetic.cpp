#include "dse/synthetic.hpp"

#include <ostream>
#include <random>
#include <set>

#include "dse/porter.hpp"

namespace dse {
namespace {

std::vector<std::string> make_words(std::size_t n) {
    static constexpr std::string_view consonants = "bdfgklmnprtvz";
    static constexpr std::string_view vowels = "aeiou";
    std::mt19937_64 rng(0x5eed'0f'5ca1ab1eULL);
    std::uniform_int_distribution<std::size_t> pick_c(0, consonants.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_v(0, vowels.size() - 1);
    std::set<std::string> seen;
    std::vector<std::string> words;
    const auto& stop = default_stopwords();
    while (words.size() < n) {
        std::string w;
        for (int s = 0; s < 2; ++s) {
            w.push_back(consonants[pick_c(rng)]);
            w.push_back(vowels[pick_v(rng)]);
        }
        w.push_back(consonants[pick_c(rng)]);
        if (stop.contains(w) || porter_stem(w) != w || !seen.insert(w).second) continue;
        words.push_back(std::move(w));
    }
    return words;
}

template <class Rng>
const std::string& choose(const std::vector<std::string>& v, Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

}  // namespace

nlohmann::json SyntheticCorpus::roles() const {
    return nlohmann::json{{"common_positive", common_positive}, {"common_negative", common_negative},
                          {"flipped", flipped},                 {"exclusive_p", exclusive_p},
                          {"exclusive_q", exclusive_q},         {"filler", filler}};
}

SyntheticCorpus make_synthetic(const SyntheticOptions& o) {
    if (o.common_positive == 0 || o.common_negative == 0 || o.flipped == 0 || o.exclusive_per_domain == 0 ||
        o.filler == 0)
        throw InputError("every synthetic word role needs at least one word");
    if (o.min_cues < 1 || o.max_cues < o.min_cues) throw InputError("bad synthetic cue count range");
    if (o.flipped_companions < 0) throw InputError("flipped_companions must be non-negative");
    if (o.min_gap < 0 || o.max_gap < o.min_gap) throw InputError("bad synthetic gap range");

    SyntheticCorpus c;
    const auto words =
        make_words(o.common_positive + o.common_negative + o.flipped + 2 * o.exclusive_per_domain + o.filler);
    auto it = words.begin();
    auto take = [&](std::size_t n) {
        std::vector<std::string> out(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
        return out;
    };
    c.common_positive = take(o.common_positive);
    c.common_negative = take(o.common_negative);
    c.flipped = take(o.flipped);
    c.exclusive_p = take(o.exclusive_per_domain);
    c.exclusive_q = take(o.exclusive_per_domain);
    c.filler = take(o.filler);

    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> cues(o.min_cues, o.max_cues);
    std::uniform_int_distribution<int> gap(o.min_gap, o.max_gap);

    for (std::size_t i = 0; i < 2 * o.reviews_per_domain; ++i) {
        // Alternate domains so both are interleaved in corpus order.
        const Domain domain = i % 2 == 0 ? Domain::p : Domain::q;
        const int label = unit(rng) < 0.5 ? 1 : 0;
        const auto& exclusive = domain == Domain::p ? c.exclusive_p : c.exclusive_q;

        std::string text;
        auto append = [&text](const std::string& w) {
            if (!text.empty()) text.push_back(' ');
            text += w;
        };
        auto fillers = [&] {
            for (int g = gap(rng); g > 0; --g) append(choose(c.filler, rng));
        };
        fillers();
        for (int k = cues(rng); k > 0; --k) {
            if (unit(rng) < o.exclusive_rate) {
                append(choose(exclusive, rng));
            } else {
                const int polarity = unit(rng) < o.polarity_noise ? 1 - label : label;
                const auto& common = polarity == 1 ? c.common_positive : c.common_negative;
                // Flipped words signal positive in p and negative in q.
                const bool fits = domain == Domain::p ? polarity == 1 : polarity == 0;
                if (fits && unit(rng) < o.flipped_share) {
                    for (int j = 0; j < o.flipped_companions; ++j) append(choose(exclusive, rng));
                    append(choose(c.flipped, rng));
                    for (int j = 0; j < o.flipped_companions; ++j) append(choose(exclusive, rng));
                } else {
                    append(choose(common, rng));
                }
            }
            fillers();
        }
        RawReview raw;
        raw.domain = o.domains[domain];
        raw.label = label;
        raw.text = std::move(text);
        c.reviews.push_back(std::move(raw));
    }
    return c;
}

void write_jsonl(std::ostream& out, std::span<const RawReview> reviews) {
    for (const auto& r : reviews) {
        nlohmann::json obj{{"domain", r.domain}, {"text", r.text}};
        if (r.label) obj["label"] = *r.label;
        if (r.rating) obj["rating"] = *r.rating;
        out << obj.dump() << '\n';
    }
}

}  // namespace dse
