#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "etr/chains.hpp"
#include "etr/label.hpp"
#include "etr/tkg.hpp"

namespace etr {

/// A query with its gold label and the chains shown to the model.
struct LabeledQuery {
    std::uint64_t id = 0;
    Quadruple query;
    Label label = Label::Yes;
    ChainSet chains;
    Split split;
    /// Gold explanation, once synthesized.
    std::optional<std::string> explanation;
};

// ---------------------------------------------------------------------------
// NLI scoring

struct NliProbabilities {
    double entailment = 0.0;
    double neutral = 0.0;
    double contradiction = 0.0;
};

/// Scores a premise/hypothesis pair. Implementations must be safe to call
/// from several threads at once.
class NliScorer {
  public:
    virtual ~NliScorer() = default;
    virtual NliProbabilities score(const std::string& premise, const std::string& hypothesis) = 0;
};

/// POST {premise, hypothesis} -> {entailment, neutral, contradiction}.
/// Network failures and 5xx responses raise TransportError.
class HttpNliScorer final : public NliScorer {
  public:
    /// `url` is the full scoring URL, e.g. http://127.0.0.1:8090/nli
    explicit HttpNliScorer(std::string url, int timeout_seconds = 30);
    NliProbabilities score(const std::string& premise, const std::string& hypothesis) override;

  private:
    std::string origin_;
    std::string path_;
    int timeout_seconds_;
};

/// Deterministic lookup table keyed by (premise, hypothesis). Unknown pairs
/// score as pure contradiction.
class StubNliScorer final : public NliScorer {
  public:
    StubNliScorer() = default;
    void set(const std::string& premise, const std::string& hypothesis, NliProbabilities p);
    NliProbabilities score(const std::string& premise, const std::string& hypothesis) override;

    /// Reads "relation label<TAB>relation label<TAB>p_ent<TAB>p_neu<TAB>p_con"
    /// rows, rendering both labels as NLI sentences.
    static StubNliScorer from_relation_file(const std::filesystem::path& file);

  private:
    std::map<std::pair<std::string, std::string>, NliProbabilities> table_;
};

/// "X <relation label> Y": the sentence fed to the NLI scorer for a relation.
std::string relation_sentence(const std::string& relation_label);

struct NeutralCandidate {
    RelationId relation = 0;
    double neutral_probability = 0.0;
};

/// relation -> relations judged neutral to it (P(neutral) > tau), ascending by id.
class NeutralRelationTable {
  public:
    NeutralRelationTable() = default;
    explicit NeutralRelationTable(std::size_t num_relations) : rows_(num_relations) {}

    std::size_t num_relations() const noexcept { return rows_.size(); }
    const std::vector<NeutralCandidate>& candidates(RelationId r) const;
    /// Throws ContractError on a self pair or a probability outside [0,1].
    void add(RelationId r, NeutralCandidate c);
    std::size_t pair_count() const noexcept;

    /// TSV "r<TAB>r'<TAB>p" rows, sorted by (r, r').
    void save(const std::filesystem::path& file) const;
    static NeutralRelationTable load(const std::filesystem::path& file, std::size_t num_relations);

  private:
    std::vector<std::vector<NeutralCandidate>> rows_;
};

/// Scores every ordered pair (r, r'), r != r', and keeps those with
/// P(neutral) > tau. Requires 0 < tau <= 1. Runs up to max_in_flight scorer
/// calls concurrently; the result does not depend on the concurrency.
NeutralRelationTable build_neutral_table(const Vocabulary& relations, NliScorer& nli, double tau,
                                         std::size_t max_in_flight = 8);

// ---------------------------------------------------------------------------
// Sampling

struct SamplerOptions {
    ChainOptions chains;
    ChainOrdering ordering = ChainOrdering::Descending;
};

/// Inclusive query-time range for a split: Train is [0, train_max_time],
/// Test is [train_max_time + 1, T - 1]. Empty ranges yield first > last.
TimeRange split_time_range(const TemporalGraph& g, const Split& split);

/// n distinct facts from the split's time range, drawn in a seeded uniform
/// order, keeping only those with at least one reasoning chain. Throws
/// ExhaustionError (with the achievable count) when fewer exist.
std::vector<LabeledQuery> sample_positives(const TemporalGraph& g, const Split& split, std::size_t n,
                                           const SamplerOptions& opts, std::uint64_t seed);

/// Hard negative: the object replaced by another entity reachable from the
/// subject inside the window, such that the corrupted fact is absent from the
/// graph. Returns nullopt when no such entity exists.
std::optional<LabeledQuery> corrupt_object(const TemporalGraph& g, const LabeledQuery& pos,
                                           std::uint64_t seed, const SamplerOptions& opts);

/// Neutral sample: the relation replaced by a table candidate such that the
/// new fact is absent from the graph; chains are copied from the positive.
/// Returns nullopt when the table row is empty or every candidate collides.
std::optional<LabeledQuery> neutralize_relation(const LabeledQuery& pos,
                                                const NeutralRelationTable& table,
                                                const TemporalGraph& g, std::uint64_t seed);

struct ClassCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
    std::size_t neutral = 0;

    std::size_t total() const noexcept { return positive + negative + neutral; }
};

struct DatasetConfig {
    SamplerOptions sampler;
    ClassCounts train;
    ClassCounts test;
    /// Defaults to the graph's last train timestamp.
    std::optional<TimestampId> train_max_time;
    std::uint64_t seed = 0;
};

/// Builds the full instance set: per split, positives then negatives then
/// neutrals, with sequential ids starting at 0 (train first). Exact counts
/// are met or ExhaustionError is thrown.
std::vector<LabeledQuery> build_dataset(const TemporalGraph& g, const NeutralRelationTable& table,
                                        const DatasetConfig& cfg);

}  // namespace etr
