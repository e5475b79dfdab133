#pragma once

#include <string>
#include <string_view>

#include "etr/chains.hpp"
#include "etr/label.hpp"
#include "etr/sampler.hpp"
#include "etr/tkg.hpp"

namespace etr {

/// Calendar instant of timestamp ordinal 0.
struct TimeEpoch {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;
    unsigned hour = 0;
    unsigned minute = 0;

    bool operator==(const TimeEpoch&) const = default;
};

/// Accepts "YYYY", "YYYY-MM-DD" or "YYYY-MM-DD HH:MM". Throws ConfigError.
TimeEpoch parse_epoch(std::string_view text);

/// Known dataset epochs: icews14, icews18, icews05-15, gdelt, wiki.
/// Throws ConfigError for unknown names.
TimeEpoch profile_epoch(std::string_view dataset_name);

/// Day -> "YYYY-MM-DD", Minutes15 -> "YYYY-MM-DD HH:MM", Year -> "YYYY",
/// counting t units from the epoch.
std::string render_time(TimestampId t, Granularity granularity, const TimeEpoch& epoch);

/// Everything needed to turn ids into text.
struct RenderContext {
    const TemporalGraph& graph;
    TimeEpoch epoch;

    std::string time(TimestampId t) const { return render_time(t, graph.granularity(), epoch); }
    const std::string& entity(EntityId e) const { return graph.entities().label(e); }
    const std::string& relation(RelationId r) const { return graph.relations().label(r); }
};

/// Chains as sentences in the set's order, separated by single spaces.
/// Length-1: "<s> <r> <o> <time>." Length-2: "<s> <r> <m> on <t1>, <m> <r2> <o> on <t2>."
std::string render_chains(const ChainSet& cs, const RenderContext& ctx);

enum class PromptKind { ExplainPositive, ExplainNegative, ExplainNeutral, Instruct, InstructNoChains };

PromptKind explain_kind(Label label) noexcept;

/// The raw template with {e_s} {r} {e_o} {t_q} {chains_text} slots.
std::string_view prompt_template(PromptKind kind) noexcept;

/// Request text asking a model to expand the templated statement for the
/// instance's label into a coherent explanation.
std::string render_explanation_prompt(const LabeledQuery& inst, const RenderContext& ctx);

struct RenderedInstance {
    std::string instruction;
    std::string input;
    std::string target;
    Label label = Label::Yes;
};

/// Instruction-tuning layout. `target` is "<Label>. <explanation>" when the
/// instance carries an explanation, otherwise just "<Label>.".
RenderedInstance render_instruct(const LabeledQuery& inst, const RenderContext& ctx, bool include_chains);

}  // namespace etr
