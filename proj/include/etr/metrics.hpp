#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etr/label.hpp"

namespace etr {

// ---------------------------------------------------------------------------
// Tokenization

/// Lowercases ASCII, then splits into maximal runs of [a-z0-9] (bytes >= 0x80
/// count as word characters) and single punctuation characters; whitespace
/// separates tokens and is dropped.
std::vector<std::string> tokenize(std::string_view text);

struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool word = false;
};

/// Byte spans of the tokens produced by tokenize().
std::vector<TokenSpan> token_spans(std::string_view text);

/// Porter's suffix-stripping algorithm as originally published, applied to
/// a lowercase word.
std::string porter_stem(std::string_view word);

// ---------------------------------------------------------------------------
// Decisions

struct ParsedPrediction {
    /// nullopt when no label word appears in the scan region (Invalid).
    std::optional<Label> label;
    /// Text after the label word with leading punctuation and spaces removed.
    std::string explanation_text;

    bool valid() const noexcept { return label.has_value(); }
};

inline constexpr std::size_t kLabelScanTokens = 10;

/// Looks for "yes", "no" or "unsure" among the first ten word tokens,
/// case-insensitively and as whole words; the first hit wins.
ParsedPrediction parse_prediction(std::string_view text);

struct ClassMetrics {
    double precision = 0.0;  // percent
    double recall = 0.0;     // percent
    double f1 = 0.0;         // percent
    std::size_t support = 0;
    std::size_t predicted = 0;
    std::size_t true_positive = 0;
};

struct MetricReport {
    std::array<ClassMetrics, 3> per_class{};
    double overall_f1 = 0.0;
    double overall_precision = 0.0;
    double overall_recall = 0.0;
    std::size_t total = 0;
    std::size_t invalid = 0;
    /// 3x3 gold x predicted counts; invalid predictions are not in the matrix.
    std::array<std::array<std::size_t, 3>, 3> confusion{};

    std::optional<double> bleu4;
    std::optional<double> rouge_l;
    std::optional<double> meteor;
    std::optional<double> bertscore_f1;
    /// Pairs BertScore could not score.
    std::size_t bertscore_unavailable = 0;
};

/// Support-weighted mean of per-class values. Zero total support gives 0.
double weighted_overall(const std::array<double, 3>& values, const std::array<std::size_t, 3>& supports);

/// One-vs-rest precision/recall/F1 per class; an invalid prediction counts as
/// wrong for its gold class. Throws InputError on a length mismatch.
MetricReport classification_report(const std::vector<std::optional<Label>>& predicted,
                                    const std::vector<Label>& gold);

// ---------------------------------------------------------------------------
// Text overlap metrics (percent)

/// Clipped n-gram statistics of one candidate/reference pair.
struct BleuStats {
    std::array<std::size_t, 4> matches{};
    std::array<std::size_t, 4> totals{};
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;

    BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
/// Uniform 1/4 weights, brevity penalty, no smoothing: any zero precision gives 0.
double bleu_from_stats(const BleuStats& s);

double bleu4(std::string_view candidate, std::string_view reference);
double corpus_bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

inline constexpr double kRougeBeta = 1.2;

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
double rouge_l(std::string_view candidate, std::string_view reference);

/// Matched (candidate index, reference index) pairs sorted by candidate index.
using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

/// Exact matches first, then Porter-stem matches among the leftovers. Each
/// stage walks the candidate from its last token backwards and pairs it with
/// the last still-unmatched reference token of the same form.
Alignment meteor_align(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
std::size_t count_chunks(const Alignment& a);

double meteor(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
double meteor(std::string_view candidate, std::string_view reference);

// ---------------------------------------------------------------------------
// BertScore

/// Supplies one vector per input token. Thread-safe implementations only.
class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) = 0;
};

/// OpenAI-compatible POST {base}/v1/embeddings with "input" set to the token list.
class HttpEmbedder final : public Embedder {
  public:
    HttpEmbedder(std::string base_url, std::string model, std::string api_key, int timeout_seconds = 60);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) override;

  private:
    std::string origin_;
    std::string path_;
    std::string model_;
    std::string api_key_;
    int timeout_seconds_;
};

/// Fixed token -> vector map; unknown tokens raise TransportError so tests can
/// exercise the unavailable path.
class StubEmbedder final : public Embedder {
  public:
    void set(const std::string& token, std::vector<double> v) { table_[token] = std::move(v); }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) override;

  private:
    std::map<std::string, std::vector<double>> table_;
};

/// Greedy cosine matching F1 on given token vectors.
double bertscore_from_vectors(const std::vector<std::vector<double>>& candidate,
                              const std::vector<std::vector<double>>& reference);

/// nullopt when the embedder fails for this pair.
std::optional<double> bertscore(std::string_view candidate, std::string_view reference, Embedder& embedder);

// ---------------------------------------------------------------------------
// Corpus evaluation

struct ScoredPair {
    std::string candidate;
    std::string reference;
};

/// Corpus BLEU-4, mean ROUGE-L and mean METEOR over the pairs, plus mean
/// BertScore over the pairs the embedder could score when one is supplied.
void add_text_metrics(MetricReport& report, const std::vector<ScoredPair>& pairs, Embedder* embedder = nullptr,
                      std::size_t max_in_flight = 4);

/// Markdown table: one row per class plus Overall, two decimals.
std::string format_markdown(const MetricReport& r);

}  // namespace etr
