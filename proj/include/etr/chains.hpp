#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "etr/tkg.hpp"

namespace etr {

/// One hop of a reasoning chain; the underlying fact is a member of the graph.
using ChainStep = Quadruple;

/// Length-1 or length-2 temporal path from the query subject to the query object.
struct ReasoningChain {
    std::vector<ChainStep> steps;

    bool operator==(const ReasoningChain&) const = default;
};

enum class ChainOrdering { Paths, Descending, Ascending, Random };

ChainOrdering parse_ordering(std::string_view text);
std::string_view to_string(ChainOrdering o) noexcept;

struct ChainSet {
    EntityId subject = 0;
    EntityId object = 0;
    std::vector<ReasoningChain> chains;
    ChainOrdering ordering = ChainOrdering::Paths;
    std::uint64_t seed = 0;

    bool empty() const noexcept { return chains.empty(); }
    std::size_t step_count() const noexcept;
    /// Steps of all chains in serialization order.
    std::vector<ChainStep> flattened() const;
};

struct ChainOptions {
    std::uint32_t window = 30;
    std::size_t max_chains = 60;
    /// Also traverse edges against their direction. Off by default.
    bool inverse_edges = false;
};

/// Every distinct length-1 and length-2 path subject -> object whose steps lie
/// in [t_q - w, t_q). Length-2 paths go through an intermediate distinct from
/// both endpoints. When more than max_chains exist, length-1 chains are kept
/// first, then length-2, each most-recent first. The result is in Paths order:
/// that same priority order.
///
/// Throws DegenerateQueryError when subject == object and RangeError for an
/// out-of-range t_q or a zero window.
ChainSet extract_chains(const TemporalGraph& g, EntityId subject, EntityId object, TimestampId t_q,
                        const ChainOptions& opts = {});

/// Reorders chains. Descending/Ascending sort chains by (latest step time,
/// earliest step time, steps) in the given direction; Random applies a
/// seed-determined permutation of the priority order; Paths restores the
/// extraction priority order. Step order inside a chain is never changed.
ChainSet order_chains(ChainSet cs, ChainOrdering ordering, std::uint64_t seed = 0);

/// True when the chain satisfies the path-validity rules for the given
/// endpoints and window (forward edges only).
bool is_valid_chain(const ReasoningChain& chain, EntityId subject, EntityId object,
                    TimestampId window_first, TimestampId t_q);

/// True when `a` comes before `b` in extraction priority order.
bool chain_priority_less(const ReasoningChain& a, const ReasoningChain& b) noexcept;

/// Entities that terminate at least one length-1 or length-2 path from
/// `subject` inside the window (excluding `subject`), in ascending id order.
std::vector<EntityId> reachable_endpoints(const TemporalGraph& g, EntityId subject, TimestampId t_q,
                                          const ChainOptions& opts = {});

}  // namespace etr
