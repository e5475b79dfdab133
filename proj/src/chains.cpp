#include "etr/chains.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "etr/error.hpp"
#include "etr/rng.hpp"

namespace etr {

ChainOrdering parse_ordering(std::string_view text) {
    if (text == "paths") return ChainOrdering::Paths;
    if (text == "descending" || text == "desc") return ChainOrdering::Descending;
    if (text == "ascending" || text == "asc") return ChainOrdering::Ascending;
    if (text == "random") return ChainOrdering::Random;
    throw ConfigError("unknown chain ordering \"" + std::string(text) +
                      "\" (expected paths, descending, ascending or random)");
}

std::string_view to_string(ChainOrdering o) noexcept {
    switch (o) {
        case ChainOrdering::Paths: return "paths";
        case ChainOrdering::Descending: return "descending";
        case ChainOrdering::Ascending: return "ascending";
        case ChainOrdering::Random: return "random";
    }
    return "paths";
}

std::size_t ChainSet::step_count() const noexcept {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.steps.size();
    return n;
}

std::vector<ChainStep> ChainSet::flattened() const {
    std::vector<ChainStep> out;
    out.reserve(step_count());
    for (const auto& c : chains) out.insert(out.end(), c.steps.begin(), c.steps.end());
    return out;
}

namespace {

TimestampId latest(const ReasoningChain& c) noexcept {
    TimestampId t = 0;
    for (const auto& s : c.steps) t = std::max(t, s.time);
    return t;
}

TimestampId earliest(const ReasoningChain& c) noexcept {
    TimestampId t = c.steps.empty() ? 0 : c.steps.front().time;
    for (const auto& s : c.steps) t = std::min(t, s.time);
    return t;
}

bool steps_less(const ReasoningChain& a, const ReasoningChain& b) noexcept {
    return std::lexicographical_compare(a.steps.begin(), a.steps.end(), b.steps.begin(),
                                        b.steps.end(), TimeMajorLess{});
}

// Total order used by Ascending/Descending.
bool time_key_less(const ReasoningChain& a, const ReasoningChain& b) noexcept {
    const auto la = latest(a), lb = latest(b);
    if (la != lb) return la < lb;
    const auto ea = earliest(a), eb = earliest(b);
    if (ea != eb) return ea < eb;
    return steps_less(a, b);
}

}  // namespace

bool chain_priority_less(const ReasoningChain& a, const ReasoningChain& b) noexcept {
    if (a.steps.size() != b.steps.size()) return a.steps.size() < b.steps.size();
    const auto la = latest(a), lb = latest(b);
    if (la != lb) return la > lb;
    const auto ea = earliest(a), eb = earliest(b);
    if (ea != eb) return ea > eb;
    return steps_less(a, b);
}

namespace {

TimestampId window_first(TimestampId t_q, std::uint32_t w) noexcept { return t_q > w ? t_q - w : 0; }

void check_query(const TemporalGraph& g, EntityId subject, EntityId object, TimestampId t_q,
                 std::uint32_t w) {
    if (subject >= g.entities().size() || object >= g.entities().size()) {
        throw ReferenceError("query entity out of vocabulary");
    }
    if (t_q >= g.num_timestamps()) {
        throw RangeError("query time " + std::to_string(t_q) + " outside [0, " +
                         std::to_string(g.num_timestamps()) + ")");
    }
    if (w == 0) throw RangeError("window size must be >= 1");
}

// An edge leaving `from` inside the window: the fact plus the entity it reaches.
struct Hop {
    Quadruple fact;
    EntityId to;
};

std::vector<Hop> hops_from(const TemporalGraph& g, EntityId from, TimestampId first, TimestampId t_q,
                           bool inverse) {
    std::vector<Hop> out;
    g.for_each_from(from, first, t_q, [&](const Quadruple& q) { out.push_back({q, q.object}); });
    if (inverse) {
        for (const auto& q : g.facts_into(from, first, t_q)) out.push_back({q, q.subject});
    }
    return out;
}

}  // namespace

ChainSet extract_chains(const TemporalGraph& g, EntityId subject, EntityId object, TimestampId t_q,
                        const ChainOptions& opts) {
    if (subject == object) {
        throw DegenerateQueryError("query subject and object are the same entity (" +
                                   std::to_string(subject) + ")");
    }
    check_query(g, subject, object, t_q, opts.window);
    if (opts.max_chains == 0) throw ConfigError("max_chains must be >= 1");
    const TimestampId first = window_first(t_q, opts.window);

    ChainSet cs;
    cs.subject = subject;
    cs.object = object;
    cs.ordering = ChainOrdering::Paths;

    // Breadth-first from the subject: level one reaches neighbours, level two
    // only needs the edges that land on the object.
    std::map<EntityId, std::vector<Quadruple>> via;  // intermediate -> first hops
    for (const auto& h : hops_from(g, subject, first, t_q, opts.inverse_edges)) {
        if (h.to == object) {
            cs.chains.push_back({{h.fact}});
        } else if (h.to != subject) {
            via[h.to].push_back(h.fact);
        }
    }
    for (const auto& [mid, firsts] : via) {
        for (const auto& h : hops_from(g, mid, first, t_q, opts.inverse_edges)) {
            if (h.to != object) continue;
            for (const auto& f : firsts) cs.chains.push_back({{f, h.fact}});
        }
    }

    std::sort(cs.chains.begin(), cs.chains.end(), chain_priority_less);
    cs.chains.erase(std::unique(cs.chains.begin(), cs.chains.end()), cs.chains.end());
    if (cs.chains.size() > opts.max_chains) cs.chains.resize(opts.max_chains);
    return cs;
}

ChainSet order_chains(ChainSet cs, ChainOrdering ordering, std::uint64_t seed) {
    auto& v = cs.chains;
    switch (ordering) {
        case ChainOrdering::Paths:
            std::sort(v.begin(), v.end(), chain_priority_less);
            break;
        case ChainOrdering::Ascending:
            std::sort(v.begin(), v.end(), time_key_less);
            break;
        case ChainOrdering::Descending:
            std::sort(v.begin(), v.end(),
                      [](const auto& a, const auto& b) { return time_key_less(b, a); });
            break;
        case ChainOrdering::Random: {
            // Canonicalize first so the permutation depends only on the
            // multiset and the seed.
            std::sort(v.begin(), v.end(), chain_priority_less);
            Rng rng(seed);
            rng.shuffle(std::span<ReasoningChain>(v));
            break;
        }
    }
    cs.ordering = ordering;
    cs.seed = ordering == ChainOrdering::Random ? seed : 0;
    return cs;
}

bool is_valid_chain(const ReasoningChain& chain, EntityId subject, EntityId object,
                    TimestampId first, TimestampId t_q) {
    const auto& s = chain.steps;
    if (s.empty() || s.size() > 2) return false;
    for (const auto& step : s) {
        if (step.time < first || step.time >= t_q) return false;
    }
    if (s.front().subject != subject || s.back().object != object) return false;
    if (s.size() == 2) {
        const auto mid = s[0].object;
        if (s[1].subject != mid || mid == subject || mid == object) return false;
    }
    return true;
}

std::vector<EntityId> reachable_endpoints(const TemporalGraph& g, EntityId subject, TimestampId t_q,
                                          const ChainOptions& opts) {
    check_query(g, subject, subject, t_q, opts.window);
    const TimestampId first = window_first(t_q, opts.window);
    std::set<EntityId> mids;
    for (const auto& h : hops_from(g, subject, first, t_q, opts.inverse_edges)) {
        if (h.to != subject) mids.insert(h.to);
    }
    std::set<EntityId> out(mids.begin(), mids.end());
    for (const auto mid : mids) {
        for (const auto& h : hops_from(g, mid, first, t_q, opts.inverse_edges)) {
            if (h.to != subject && h.to != mid) out.insert(h.to);
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace etr
