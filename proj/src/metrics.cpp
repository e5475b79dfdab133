#include "etr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "etr/error.hpp"

namespace etr {

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_word(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_word(c)) {
            const std::size_t b = i;
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
            out.push_back({b, i, true});
        } else {
            out.push_back({i, i + 1, false});
            ++i;
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& s : token_spans(text)) {
        std::string t(text.substr(s.begin, s.end - s.begin));
        std::transform(t.begin(), t.end(), t.begin(), lower);
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decisions

ParsedPrediction parse_prediction(std::string_view text) {
    ParsedPrediction p;
    std::size_t words = 0;
    for (const auto& s : token_spans(text)) {
        if (!s.word) continue;
        if (++words > kLabelScanTokens) break;
        std::string t(text.substr(s.begin, s.end - s.begin));
        std::transform(t.begin(), t.end(), t.begin(), lower);
        std::optional<Label> hit;
        if (t == "yes") hit = Label::Yes;
        if (t == "no") hit = Label::No;
        if (t == "unsure") hit = Label::Unsure;
        if (!hit) continue;
        p.label = hit;
        std::size_t rest = s.end;
        while (rest < text.size() && !is_word(static_cast<unsigned char>(text[rest]))) ++rest;
        p.explanation_text = std::string(text.substr(rest));
        return p;
    }
    p.explanation_text = std::string(text);
    return p;
}

double weighted_overall(const std::array<double, 3>& values, const std::array<std::size_t, 3>& supports) {
    double num = 0.0;
    std::size_t den = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        num += values[c] * static_cast<double>(supports[c]);
        den += supports[c];
    }
    return den == 0 ? 0.0 : num / static_cast<double>(den);
}

MetricReport classification_report(const std::vector<std::optional<Label>>& predicted,
                                   const std::vector<Label>& gold) {
    if (predicted.size() != gold.size()) {
        throw InputError("prediction count " + std::to_string(predicted.size()) + " does not match gold count " +
                         std::to_string(gold.size()));
    }
    MetricReport r;
    r.total = gold.size();
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto g = index_of(gold[i]);
        r.per_class[g].support += 1;
        if (!predicted[i]) {
            ++r.invalid;
            continue;
        }
        const auto p = index_of(*predicted[i]);
        r.confusion[g][p] += 1;
        r.per_class[p].predicted += 1;
        if (p == g) r.per_class[g].true_positive += 1;
    }
    std::array<double, 3> p{}, rc{}, f{};
    std::array<std::size_t, 3> supports{};
    for (std::size_t c = 0; c < 3; ++c) {
        auto& m = r.per_class[c];
        const auto tp = static_cast<double>(m.true_positive);
        m.precision = m.predicted ? 100.0 * tp / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support ? 100.0 * tp / static_cast<double>(m.support) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.support == 0 && m.predicted == 0) {
            spdlog::warn("class {} is absent from both predictions and gold; its F1 is reported as 0",
                         display_name(kAllLabels[c]));
        }
        p[c] = m.precision;
        rc[c] = m.recall;
        f[c] = m.f1;
        supports[c] = m.support;
    }
    r.overall_precision = weighted_overall(p, supports);
    r.overall_recall = weighted_overall(rc, supports);
    r.overall_f1 = weighted_overall(f, supports);
    return r;
}

// ---------------------------------------------------------------------------
// BLEU

BleuStats& BleuStats::operator+=(const BleuStats& o) {
    for (std::size_t n = 0; n < 4; ++n) {
        matches[n] += o.matches[n];
        totals[n] += o.totals[n];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                     toks.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1;
    }
    return out;
}

}  // namespace

BleuStats bleu_stats(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    BleuStats s;
    s.candidate_length = candidate.size();
    s.reference_length = reference.size();
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto c = ngram_counts(candidate, n);
        const auto r = ngram_counts(reference, n);
        for (const auto& [gram, count] : c) {
            auto it = r.find(gram);
            if (it != r.end()) s.matches[n - 1] += std::min(count, it->second);
            s.totals[n - 1] += count;
        }
    }
    return s;
}

double bleu_from_stats(const BleuStats& s) {
    if (s.candidate_length == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
    }
    const double c = static_cast<double>(s.candidate_length);
    const double r = static_cast<double>(s.reference_length);
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu4(std::string_view candidate, std::string_view reference) {
    return bleu_from_stats(bleu_stats(tokenize(candidate), tokenize(reference)));
}

double corpus_bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
    if (candidates.size() != references.size()) throw InputError("candidate and reference counts differ");
    BleuStats total;
    for (std::size_t i = 0; i < candidates.size(); ++i) total += bleu_stats(tokenize(candidates[i]), tokenize(references[i]));
    return bleu_from_stats(total);
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    const double b2 = kRougeBeta * kRougeBeta;
    return 100.0 * (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    return rouge_l(tokenize(candidate), tokenize(reference));
}

// ---------------------------------------------------------------------------
// METEOR

namespace {

void match_stage(const std::vector<std::string>& cand_forms, const std::vector<std::string>& ref_forms,
                 std::vector<bool>& cand_used, std::vector<bool>& ref_used, Alignment& out) {
    std::map<std::string_view, std::vector<std::size_t>> positions;
    for (std::size_t j = 0; j < ref_forms.size(); ++j) {
        if (!ref_used[j]) positions[ref_forms[j]].push_back(j);
    }
    for (std::size_t i = cand_forms.size(); i-- > 0;) {
        if (cand_used[i]) continue;
        auto it = positions.find(cand_forms[i]);
        if (it == positions.end() || it->second.empty()) continue;
        const auto j = it->second.back();
        it->second.pop_back();
        cand_used[i] = true;
        ref_used[j] = true;
        out.emplace_back(i, j);
    }
}

}  // namespace

Alignment meteor_align(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    Alignment a;
    std::vector<bool> cu(candidate.size(), false), ru(reference.size(), false);
    match_stage(candidate, reference, cu, ru, a);
    std::vector<std::string> cs, rs;
    cs.reserve(candidate.size());
    rs.reserve(reference.size());
    for (const auto& t : candidate) cs.push_back(porter_stem(t));
    for (const auto& t : reference) rs.push_back(porter_stem(t));
    match_stage(cs, rs, cu, ru, a);
    std::sort(a.begin(), a.end());
    return a;
}

std::size_t count_chunks(const Alignment& a) {
    if (a.empty()) return 0;
    std::size_t chunks = 1;
    for (std::size_t k = 1; k < a.size(); ++k) {
        if (!(a[k].first == a[k - 1].first + 1 && a[k].second == a[k - 1].second + 1)) ++chunks;
    }
    return chunks;
}

double meteor(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const auto a = meteor_align(candidate, reference);
    const double m = static_cast<double>(a.size());
    if (m == 0.0) return 0.0;
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const auto chunks = count_chunks(a);
    // A complete match in one chunk carries no fragmentation.
    const bool whole = a.size() == candidate.size() && a.size() == reference.size() && chunks == 1;
    const double frag = whole ? 0.0 : static_cast<double>(chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    return 100.0 * fmean * (1.0 - penalty);
}

double meteor(std::string_view candidate, std::string_view reference) {
    return meteor(tokenize(candidate), tokenize(reference));
}

// ---------------------------------------------------------------------------
// Reporting

std::string format_markdown(const MetricReport& r) {
    std::ostringstream os;
    os << "| Class   | Precision | Recall |     F1 | Support |\n";
    os << "|---------|----------:|-------:|-------:|--------:|\n";
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& m = r.per_class[c];
        os << fmt::format("| {:<7} | {:>9.2f} | {:>6.2f} | {:>6.2f} | {:>7} |\n", display_name(kAllLabels[c]),
                          m.precision, m.recall, m.f1, m.support);
    }
    os << fmt::format("| {:<7} | {:>9.2f} | {:>6.2f} | {:>6.2f} | {:>7} |\n", "Overall", r.overall_precision,
                      r.overall_recall, r.overall_f1, r.total);
    if (r.bleu4 || r.rouge_l || r.meteor || r.bertscore_f1) {
        os << "\n| BLEU-4 | ROUGE-L | METEOR | BertScore |\n";
        os << "|-------:|--------:|-------:|----------:|\n";
        auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("n/a"); };
        os << fmt::format("| {:>6} | {:>7} | {:>6} | {:>9} |\n", cell(r.bleu4), cell(r.rouge_l), cell(r.meteor),
                          cell(r.bertscore_f1));
    }
    if (r.invalid) os << "\nInvalid predictions: " << r.invalid << " of " << r.total << "\n";
    return os.str();
}

}  // namespace etr
