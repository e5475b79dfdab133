#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace etr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TimestampId = std::uint32_t;

enum class Granularity { Day, Minutes15, Year };

Granularity parse_granularity(std::string_view text);
std::string_view to_string(Granularity g) noexcept;

/// One timestamped fact (subject, relation, object, time).
struct Quadruple {
    EntityId subject = 0;
    RelationId relation = 0;
    EntityId object = 0;
    TimestampId time = 0;

    auto operator<=>(const Quadruple&) const = default;
};

/// Orders by (time, subject, relation, object); the canonical fact order.
struct TimeMajorLess {
    bool operator()(const Quadruple& a, const Quadruple& b) const noexcept {
        return std::tie(a.time, a.subject, a.relation, a.object) <
               std::tie(b.time, b.subject, b.relation, b.object);
    }
};

struct QuadrupleHash {
    std::size_t operator()(const Quadruple& q) const noexcept;
};

/// Dense id -> label table with reverse lookup.
class Vocabulary {
  public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    bool contains(std::uint32_t id) const noexcept { return id < labels_.size(); }
    /// Throws VocabularyError when the id has no label.
    const std::string& label(std::uint32_t id) const;
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::vector<std::string>& labels() const noexcept { return labels_; }

  private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

/// Inclusive time range of one source split file.
struct TimeRange {
    TimestampId first = 0;
    TimestampId last = 0;
};

enum class SplitKind { Train, Test };

std::string_view to_string(SplitKind k) noexcept;

/// Extrapolation split: training queries lie at or before train_max_time,
/// test queries strictly after it.
struct Split {
    TimestampId train_max_time = 0;
    SplitKind kind = SplitKind::Train;
};

struct BuildStats {
    std::size_t input_facts = 0;
    std::size_t duplicates = 0;
};

/// Immutable, indexed temporal knowledge graph.
class TemporalGraph {
  public:
    struct SourceRanges {
        std::optional<TimeRange> train;
        std::optional<TimeRange> valid;
        std::optional<TimeRange> test;
    };

    /// Builds all indexes. Duplicate facts are kept once; ids are checked
    /// against the vocabularies (ReferenceError).
    static TemporalGraph build(Vocabulary entities, Vocabulary relations,
                               std::vector<Quadruple> facts, Granularity granularity,
                               SourceRanges ranges = {});

    std::span<const Quadruple> facts() const noexcept { return facts_; }
    const Vocabulary& entities() const noexcept { return entities_; }
    const Vocabulary& relations() const noexcept { return relations_; }
    Granularity granularity() const noexcept { return granularity_; }
    const SourceRanges& source_ranges() const noexcept { return ranges_; }
    const BuildStats& build_stats() const noexcept { return stats_; }

    /// Number of timestamps T; valid ids are [0, T).
    TimestampId num_timestamps() const noexcept { return num_timestamps_; }

    /// Facts at exactly time t (empty for t >= T).
    std::span<const Quadruple> facts_at(TimestampId t) const noexcept;

    /// Facts with time in [first, last_exclusive), in canonical order.
    std::span<const Quadruple> facts_between(TimestampId first,
                                             TimestampId last_exclusive) const noexcept;

    /// Facts with the given subject and time in [first, last_exclusive),
    /// ordered by (time, relation, object).
    std::vector<Quadruple> facts_from(EntityId subject, TimestampId first,
                                      TimestampId last_exclusive) const;

    /// Visits the same facts as facts_from without allocating.
    void for_each_from(EntityId subject, TimestampId first, TimestampId last_exclusive,
                       const std::function<void(const Quadruple&)>& visit) const;

    /// Facts with the given object and time in [first, last_exclusive).
    std::vector<Quadruple> facts_into(EntityId object, TimestampId first,
                                      TimestampId last_exclusive) const;

    bool contains(const Quadruple& q) const;

    /// Throws ReferenceError when any id is outside the vocabularies.
    void check_ids(const Quadruple& q) const;

    /// Default extrapolation boundary: last train timestamp, or T-1 when no
    /// train range is recorded.
    TimestampId default_train_max_time() const noexcept;

  private:
    Vocabulary entities_;
    Vocabulary relations_;
    Granularity granularity_ = Granularity::Day;
    SourceRanges ranges_;
    BuildStats stats_;
    TimestampId num_timestamps_ = 0;

    std::vector<Quadruple> facts_;             // canonical (time-major) order
    std::vector<std::size_t> time_offsets_;    // size T+1, into facts_
    std::vector<std::uint32_t> by_subject_;    // fact indices, (subject, time, relation, object)
    std::vector<std::size_t> subject_offsets_; // size |E|+1, into by_subject_
    std::vector<std::uint32_t> by_object_;     // fact indices, (object, time, subject, relation)
    std::vector<std::size_t> object_offsets_;  // size |E|+1, into by_object_
    std::unordered_set<Quadruple, QuadrupleHash> membership_;
};

/// Facts with timestamp in [max(0, t_q - w), t_q). Throws RangeError when
/// t_q >= T or w == 0.
std::span<const Quadruple> facts_in_window(const TemporalGraph& g, TimestampId t_q,
                                           std::uint32_t w);

/// Exact membership test; throws ReferenceError for out-of-vocabulary ids.
bool contains_fact(const TemporalGraph& g, const Quadruple& q);

struct ParseOptions {
    Granularity granularity = Granularity::Day;
    /// Raw timestamps are divided by this unit (e.g. 24 for hour-stamped
    /// daily data); a raw value not divisible by it is a parse error.
    std::uint32_t time_unit = 1;
};

/// Reads train/valid/test.txt plus entity2id.txt and relation2id.txt from
/// `dir`. Missing valid/test files are treated as empty.
TemporalGraph parse_dataset(const std::filesystem::path& dir, const ParseOptions& opts = {});

/// Reads a "label<TAB>id" vocabulary file.
Vocabulary read_vocabulary(const std::filesystem::path& file);

/// Reads one 4-column quadruple file, validating ids against the vocabulary sizes.
std::vector<Quadruple> read_quadruples(const std::filesystem::path& file,
                                       std::size_t num_entities, std::size_t num_relations,
                                       std::uint32_t time_unit = 1);

/// Writes facts as 4-column TSV in canonical order.
void write_quadruples(const std::filesystem::path& file, std::span<const Quadruple> facts);

/// Binary snapshot: "TKG1", u32 |E|, u32 |R|, u32 |F|, then |F| x 4 u32 (LE).
void write_snapshot(const std::filesystem::path& file, const TemporalGraph& g);

struct Snapshot {
    std::uint32_t num_entities = 0;
    std::uint32_t num_relations = 0;
    std::vector<Quadruple> facts;
};

Snapshot read_snapshot(const std::filesystem::path& file);

}  // namespace etr
