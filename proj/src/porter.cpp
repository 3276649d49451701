#include "dse/porter.hpp"

#include <algorithm>

namespace dse {
namespace {

// Working state for one word. `end` is the index one past the last
// character of the current stem; `j` marks the stem boundary set by ends().
class Stemmer {
public:
    explicit Stemmer(std::string_view word) : b_(word), end_(word.size()) {}

    std::string run() {
        if (end_ <= 2) return b_;
        step1ab();
        if (end_ > 1) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        b_.resize(end_);
        return b_;
    }

private:
    bool cons(std::size_t i) const {
        switch (b_[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 ? true : !cons(i - 1);
            default:
                return true;
        }
    }

    // Number of VC sequences in b_[0, j_).
    int measure() const {
        int n = 0;
        std::size_t i = 0;
        while (true) {
            if (i >= j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i >= j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i >= j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (std::size_t i = 0; i < j_; ++i)
            if (!cons(i)) return true;
        return false;
    }

    // b_[i-1], b_[i] is a double consonant.
    bool double_cons(std::size_t i) const {
        if (i < 1) return false;
        if (b_[i] != b_[i - 1]) return false;
        return cons(i);
    }

    // b_[i-2], b_[i-1], b_[i] is consonant-vowel-consonant and the final
    // consonant is not w, x or y.
    bool cvc(std::size_t i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = b_[i];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view suffix) {
        if (suffix.size() > end_) return false;
        if (std::string_view(b_).substr(end_ - suffix.size(), suffix.size()) != suffix) return false;
        j_ = end_ - suffix.size();
        return true;
    }

    void set_to(std::string_view s) {
        b_.replace(j_, end_ - j_, s);
        end_ = j_ + s.size();
        b_.resize(std::max(b_.size(), end_));
    }

    void replace_if_measured(std::string_view s) {
        if (measure() > 0) set_to(s);
    }

    void step1ab() {
        if (b_[end_ - 1] == 's') {
            if (ends("sses")) {
                end_ -= 2;
            } else if (ends("ies")) {
                set_to("i");
            } else if (b_[end_ - 2] != 's') {
                --end_;
            }
        }
        if (ends("eed")) {
            if (measure() > 0) --end_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            end_ = j_;
            if (ends("at")) {
                set_to("ate");
            } else if (ends("bl")) {
                set_to("ble");
            } else if (ends("iz")) {
                set_to("ize");
            } else if (double_cons(end_ - 1)) {
                --end_;
                const char ch = b_[end_ - 1];
                if (ch == 'l' || ch == 's' || ch == 'z') ++end_;
            } else {
                j_ = end_;
                if (measure() == 1 && cvc(end_ - 1)) set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[end_ - 1] = 'i';
    }

    void step2() {
        if (end_ < 2) return;
        switch (b_[end_ - 2]) {
            case 'a':
                if (ends("ational")) { replace_if_measured("ate"); break; }
                if (ends("tional")) { replace_if_measured("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { replace_if_measured("ence"); break; }
                if (ends("anci")) { replace_if_measured("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { replace_if_measured("ize"); break; }
                break;
            case 'l':
                if (ends("bli")) { replace_if_measured("ble"); break; }
                if (ends("alli")) { replace_if_measured("al"); break; }
                if (ends("entli")) { replace_if_measured("ent"); break; }
                if (ends("eli")) { replace_if_measured("e"); break; }
                if (ends("ousli")) { replace_if_measured("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { replace_if_measured("ize"); break; }
                if (ends("ation")) { replace_if_measured("ate"); break; }
                if (ends("ator")) { replace_if_measured("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { replace_if_measured("al"); break; }
                if (ends("iveness")) { replace_if_measured("ive"); break; }
                if (ends("fulness")) { replace_if_measured("ful"); break; }
                if (ends("ousness")) { replace_if_measured("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { replace_if_measured("al"); break; }
                if (ends("iviti")) { replace_if_measured("ive"); break; }
                if (ends("biliti")) { replace_if_measured("ble"); break; }
                break;
            case 'g':
                if (ends("logi")) { replace_if_measured("log"); break; }
                break;
            default:
                break;
        }
    }

    void step3() {
        switch (b_[end_ - 1]) {
            case 'e':
                if (ends("icate")) { replace_if_measured("ic"); break; }
                if (ends("ative")) { replace_if_measured(""); break; }
                if (ends("alize")) { replace_if_measured("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { replace_if_measured("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { replace_if_measured("ic"); break; }
                if (ends("ful")) { replace_if_measured(""); break; }
                break;
            case 's':
                if (ends("ness")) { replace_if_measured(""); break; }
                break;
            default:
                break;
        }
    }

    void step4() {
        if (end_ < 2) return;
        bool matched = false;
        switch (b_[end_ - 2]) {
            case 'a': matched = ends("al"); break;
            case 'c': matched = ends("ance") || ends("ence"); break;
            case 'e': matched = ends("er"); break;
            case 'i': matched = ends("ic"); break;
            case 'l': matched = ends("able") || ends("ible"); break;
            case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
            case 'o':
                if (ends("ion") && j_ >= 1 && (b_[j_ - 1] == 's' || b_[j_ - 1] == 't')) {
                    matched = true;
                } else {
                    matched = ends("ou");
                }
                break;
            case 's': matched = ends("ism"); break;
            case 't': matched = ends("ate") || ends("iti"); break;
            case 'u': matched = ends("ous"); break;
            case 'v': matched = ends("ive"); break;
            case 'z': matched = ends("ize"); break;
            default: break;
        }
        if (matched && measure() > 1) end_ = j_;
    }

    void step5() {
        // The measure is taken over the word as it stood on entry; a trailing
        // 'e' cannot complete a VC pair, so this equals the measure of the stem.
        j_ = end_;
        if (b_[end_ - 1] == 'e') {
            const int m = measure();
            if (m > 1 || (m == 1 && !cvc(end_ - 2))) --end_;
        }
        if (b_[end_ - 1] == 'l' && double_cons(end_ - 1) && measure() > 1) --end_;
    }

    std::string b_;
    std::size_t end_;
    std::size_t j_ = 0;
};

}  // namespace

std::string porter_stem(std::string_view word) {
    const bool alpha = std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; });
    if (!alpha || word.size() <= 2) return std::string(word);
    return Stemmer(word).run();
}

}  // namespace dse
