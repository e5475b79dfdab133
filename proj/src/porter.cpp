#include <string>
#include <string_view>

#include "etr/metrics.hpp"

namespace etr {

namespace {

bool is_vowel_char(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool consonant(const std::string& w, std::size_t i) {
    if (is_vowel_char(w[i])) return false;
    if (w[i] == 'y') return i == 0 ? true : !consonant(w, i - 1);
    return true;
}

// Number of VC sequences in [C](VC)^m[V].
int measure(const std::string& s) {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool c = consonant(s, i);
        if (c && prev_vowel) ++m;
        prev_vowel = !c;
    }
    return m;
}

bool has_vowel(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!consonant(s, i)) return true;
    }
    return false;
}

bool double_consonant(const std::string& s) {
    const auto n = s.size();
    return n >= 2 && s[n - 1] == s[n - 2] && consonant(s, n - 1);
}

bool cvc(const std::string& s) {
    const auto n = s.size();
    if (n < 3) return false;
    const char last = s[n - 1];
    return consonant(s, n - 3) && !consonant(s, n - 2) && consonant(s, n - 1) && last != 'w' && last != 'x' &&
           last != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip(const std::string& w, std::string_view suffix) { return w.substr(0, w.size() - suffix.size()); }

struct Rule {
    std::string_view suffix;
    std::string_view replacement;
    int min_measure;  // condition m > min_measure
};

// The first rule whose suffix matches decides; if its condition fails the
// word is left alone.
std::string apply_first(const std::string& w, std::initializer_list<Rule> rules) {
    for (const auto& r : rules) {
        if (!ends_with(w, r.suffix)) continue;
        auto stem = strip(w, r.suffix);
        if (measure(stem) > r.min_measure) return stem + std::string(r.replacement);
        return w;
    }
    return w;
}

std::string step1a(const std::string& w) {
    if (ends_with(w, "sses")) return strip(w, "sses") + "ss";
    if (ends_with(w, "ies")) return strip(w, "ies") + "i";
    if (ends_with(w, "ss")) return w;
    if (ends_with(w, "s")) return strip(w, "s");
    return w;
}

std::string step1b(const std::string& w) {
    if (ends_with(w, "eed")) {
        auto stem = strip(w, "eed");
        return measure(stem) > 0 ? stem + "ee" : w;
    }
    std::string stem;
    bool removed = false;
    for (std::string_view suffix : {"ed", "ing"}) {
        if (ends_with(w, suffix)) {
            stem = strip(w, suffix);
            if (has_vowel(stem)) {
                removed = true;
                break;
            }
        }
    }
    if (!removed) return w;
    if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
    if (double_consonant(stem)) {
        const char last = stem.back();
        if (last != 'l' && last != 's' && last != 'z') stem.pop_back();
        return stem;
    }
    if (measure(stem) == 1 && cvc(stem)) return stem + "e";
    return stem;
}

std::string step1c(const std::string& w) {
    if (ends_with(w, "y")) {
        auto stem = strip(w, "y");
        if (has_vowel(stem)) return stem + "i";
    }
    return w;
}

std::string step2(const std::string& w) {
    return apply_first(w, {{"ational", "ate", 0}, {"tional", "tion", 0}, {"enci", "ence", 0},
                           {"anci", "ance", 0},   {"izer", "ize", 0},    {"abli", "able", 0},
                           {"alli", "al", 0},     {"entli", "ent", 0},   {"eli", "e", 0},
                           {"ousli", "ous", 0},   {"ization", "ize", 0}, {"ation", "ate", 0},
                           {"ator", "ate", 0},    {"alism", "al", 0},    {"iveness", "ive", 0},
                           {"fulness", "ful", 0}, {"ousness", "ous", 0}, {"aliti", "al", 0},
                           {"iviti", "ive", 0},   {"biliti", "ble", 0}});
}

std::string step3(const std::string& w) {
    return apply_first(w, {{"icate", "ic", 0},
                           {"ative", "", 0},
                           {"alize", "al", 0},
                           {"iciti", "ic", 0},
                           {"ical", "ic", 0},
                           {"ful", "", 0},
                           {"ness", "", 0}});
}

std::string step4(const std::string& w) {
    static constexpr std::string_view before_ion[] = {"al", "ance", "ence", "er", "ic", "able",
                                                      "ible", "ant", "ement", "ment", "ent"};
    static constexpr std::string_view after_ion[] = {"ou", "ism", "ate", "iti", "ous", "ive", "ize"};
    for (auto s : before_ion) {
        if (ends_with(w, s)) {
            auto stem = strip(w, s);
            return measure(stem) > 1 ? stem : w;
        }
    }
    if (ends_with(w, "ion")) {
        auto stem = strip(w, "ion");
        const bool st = !stem.empty() && (stem.back() == 's' || stem.back() == 't');
        return measure(stem) > 1 && st ? stem : w;
    }
    for (auto s : after_ion) {
        if (ends_with(w, s)) {
            auto stem = strip(w, s);
            return measure(stem) > 1 ? stem : w;
        }
    }
    return w;
}

std::string step5a(const std::string& w) {
    if (ends_with(w, "e")) {
        auto stem = strip(w, "e");
        const int m = measure(stem);
        if (m > 1 || (m == 1 && !cvc(stem))) return stem;
    }
    return w;
}

std::string step5b(const std::string& w) {
    if (ends_with(w, "ll") && measure(strip(w, "l")) > 1) return strip(w, "l");
    return w;
}

}  // namespace

std::string porter_stem(std::string_view word) {
    std::string w(word);
    if (w.empty()) return w;
    w = step1a(w);
    w = step1b(w);
    w = step1c(w);
    w = step2(w);
    w = step3(w);
    w = step4(w);
    w = step5a(w);
    w = step5b(w);
    return w;
}

}  // namespace etr
