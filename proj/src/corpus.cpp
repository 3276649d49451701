#include "dse/corpus.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "dse/porter.hpp"

namespace dse {
namespace {

// Decodes one UTF-8 sequence starting at text[pos]. Invalid bytes decode to
// U+FFFD and consume one byte.
char32_t next_code_point(std::string_view text, std::size_t& pos) {
    const auto lead = static_cast<unsigned char>(text[pos]);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
        ++pos;
        return lead;
    } else if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + extra >= text.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        const auto cont = static_cast<unsigned char>(text[pos + i]);
        if ((cont & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cont & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space(char32_t cp) {
    return cp == ' ' || (cp >= '\t' && cp <= '\r') || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F || cp == 0x3000;
}

// ASCII punctuation and symbols plus the Unicode punctuation blocks that
// show up in review text (Latin-1, General Punctuation, CJK, fullwidth).
bool is_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
               (cp >= 0x7B && cp <= 0x7E);
    }
    switch (cp) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
        case 0x37E: case 0x387: case 0x55A: case 0x55B: case 0x55C: case 0x55D: case 0x55E:
        case 0x55F: case 0x589: case 0x5BE: case 0x5C0: case 0x5C3: case 0x5F3: case 0x5F4:
        case 0x60C: case 0x61B: case 0x61F: case 0x6D4: case 0xFFFD:
            return true;
        default:
            break;
    }
    return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
           (cp >= 0x2E00 && cp <= 0x2E4F) || (cp >= 0x3001 && cp <= 0x3003) ||
           (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0x3014 && cp <= 0x301F) ||
           (cp >= 0xFE10 && cp <= 0xFE19) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
           (cp >= 0xFE50 && cp <= 0xFE6B) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
           (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
           (cp >= 0xFF5B && cp <= 0xFF65);
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp < 0x80) return cp;
    if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7)) return cp + 0x20;
    if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x131 && cp != 0x138 && cp != 0x149 &&
        cp != 0x17F) {
        // Latin Extended-A pairs: even/odd in most of the block, odd/even in
        // 0x139-0x148 and 0x179-0x17E.
        const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
        if (odd_upper) return (cp % 2 == 1) ? cp + 1 : cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

bool ascii_letters(std::string_view s) {
    for (char c : s)
        if (c < 'a' || c > 'z') return false;
    return !s.empty();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<int> explicit_label(std::string_view field) {
    if (field == "pos" || field == "positive") return 1;
    if (field == "neg" || field == "negative") return 0;
    return std::nullopt;
}

RawReview parse_tsv(std::string_view line) {
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw InputError("expected domain<TAB>rating-or-label<TAB>text");
    RawReview raw;
    raw.domain = std::string(line.substr(0, t1));
    const std::string field = trim(line.substr(t1 + 1, t2 - t1 - 1));
    raw.text = std::string(line.substr(t2 + 1));
    if (auto label = explicit_label(field)) {
        raw.label = label;
    } else {
        double rating = 0.0;
        const auto* first = field.data();
        const auto* last = field.data() + field.size();
        const auto [ptr, ec] = std::from_chars(first, last, rating);
        if (ec != std::errc{} || ptr != last || field.empty())
            throw InputError("second field '" + field + "' is neither a rating nor pos/neg");
        raw.rating = rating;
    }
    return raw;
}

RawReview parse_json(std::string_view line) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw InputError("expected a JSON object");
    const auto domain = obj.find("domain");
    const auto text = obj.find("text");
    if (domain == obj.end() || !domain->is_string()) throw InputError("missing string field 'domain'");
    if (text == obj.end() || !text->is_string()) throw InputError("missing string field 'text'");
    const auto rating = obj.find("rating");
    const auto label = obj.find("label");
    const bool has_rating = rating != obj.end();
    const bool has_label = label != obj.end();
    if (has_rating == has_label) throw InputError("exactly one of 'rating' or 'label' is required");

    RawReview raw;
    raw.domain = domain->get<std::string>();
    raw.text = text->get<std::string>();
    if (has_rating) {
        if (!rating->is_number()) throw InputError("'rating' must be a number");
        raw.rating = rating->get<double>();
    } else {
        if (!label->is_number_integer() || (label->get<long long>() != 0 && label->get<long long>() != 1))
            throw InputError("'label' must be 0 or 1");
        raw.label = static_cast<int>(label->get<long long>());
    }
    return raw;
}

Domain resolve_or_fill(DomainNames& names, std::string_view tag) {
    if (tag.empty()) throw InputError("empty domain tag");
    if (names.contains(tag)) return names.resolve(tag);
    for (std::size_t i = 0; i < 2; ++i) {
        if (names.names[i].empty()) {
            names.names[i] = std::string(tag);
            return static_cast<Domain>(i);
        }
    }
    return names.resolve(tag);  // throws
}

}  // namespace

void PreprocessConfig::validate() const {
    if (min_review_tokens < 1) throw InputError("min-review-tokens must be >= 1");
}

std::optional<int> derive_label(double rating) {
    if (!(rating >= 1.0 && rating <= 5.0))
        throw InputError("rating " + std::to_string(rating) + " outside [1.0, 5.0]");
    if (rating > 3.0) return 1;
    if (rating < 3.0) return 0;
    return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& cfg) {
    std::vector<std::string> out;
    std::string current;
    bool ascii_only = true;

    auto flush = [&] {
        if (current.empty()) return;
        if (!cfg.stopwords.contains(current)) {
            if (cfg.stem && ascii_only && ascii_letters(current)) {
                out.push_back(porter_stem(current));
            } else {
                out.push_back(std::move(current));
            }
        }
        current.clear();
        ascii_only = true;
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = next_code_point(text, pos);
        if (is_space(cp)) {
            flush();
            continue;
        }
        if (is_punct(cp)) continue;
        if (cfg.lowercase) cp = to_lower(cp);
        if (cp >= 0x80) ascii_only = false;
        append_utf8(current, cp);
    }
    flush();
    return out;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
    lines += o.lines;
    kept += o.kept;
    dropped_neutral += o.dropped_neutral;
    dropped_short += o.dropped_short;
    dropped_blank += o.dropped_blank;
    return *this;
}

std::size_t Corpus::count(Domain d) const {
    std::size_t n = 0;
    for (const auto& r : reviews) n += r.domain == d;
    return n;
}

std::optional<RawReview> parse_corpus_line(std::string_view line, CorpusFormat format) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) return std::nullopt;
    if (format == CorpusFormat::detect) {
        const auto first = line.find_first_not_of(" \t");
        format = line[first] == '{' ? CorpusFormat::jsonl : CorpusFormat::tsv;
    }
    RawReview raw = format == CorpusFormat::jsonl ? parse_json(line) : parse_tsv(line);
    if (raw.rating && !(*raw.rating >= 1.0 && *raw.rating <= 5.0))
        throw InputError("rating " + std::to_string(*raw.rating) + " outside [1.0, 5.0]");
    return raw;
}

Corpus load_corpus(std::istream& in, const PreprocessConfig& cfg, const LoadOptions& opts) {
    cfg.validate();
    Corpus corpus;
    corpus.domains = opts.domains;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        ++corpus.stats.lines;
        try {
            auto raw = parse_corpus_line(line, opts.format);
            if (!raw) {
                ++corpus.stats.dropped_blank;
                continue;
            }
            const Domain domain = resolve_or_fill(corpus.domains, raw->domain);
            const std::optional<int> label = raw->label ? raw->label : derive_label(*raw->rating);
            if (!label) {
                ++corpus.stats.dropped_neutral;
                continue;
            }
            auto tokens = tokenize(raw->text, cfg);
            if (static_cast<int>(tokens.size()) < cfg.min_review_tokens) {
                ++corpus.stats.dropped_short;
                continue;
            }
            corpus.reviews.push_back({domain, *label, std::move(tokens)});
            ++corpus.stats.kept;
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return corpus;
}

Corpus load_corpus_file(const std::filesystem::path& path, const PreprocessConfig& cfg,
                        const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open corpus file '" + path.string() + "'");
    try {
        return load_corpus(in, cfg, opts);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void append_corpus(Corpus& into, Corpus&& more) {
    // Remap `more` onto `into`'s domain slots; names may be in either order.
    std::array<Domain, 2> remap{Domain::p, Domain::q};
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& name = more.domains.names[i];
        if (name.empty()) continue;
        remap[i] = resolve_or_fill(into.domains, name);
    }
    for (auto& r : more.reviews) {
        r.domain = remap[index(r.domain)];
        into.reviews.push_back(std::move(r));
    }
    into.stats += more.stats;
}

}  // namespace dse
