#include "etr/prompt.hpp"

#include <chrono>
#include <map>

#include <fmt/format.h>

#include "etr/error.hpp"

namespace etr {

namespace {

constexpr std::string_view kRevision =
    " Please revise the provided text to ensure that the prediction aligns with the reasoning steps. "
    "Expand the explanation of each reasoning step to make the text more coherent and readable. "
    "If necessary, add additional reasoning steps to clarify the logic. "
    "The output should be a single, concise paragraph without bullet points, ensuring clarity and "
    "logical consistency.";

unsigned parse_field(std::string_view text, std::string_view whole) {
    if (text.empty()) throw ConfigError("malformed epoch \"" + std::string(whole) + "\"");
    unsigned v = 0;
    for (char c : text) {
        if (c < '0' || c > '9') throw ConfigError("malformed epoch \"" + std::string(whole) + "\"");
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    return v;
}

std::string fill(std::string_view tmpl, const std::map<std::string_view, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            const auto name = tmpl.substr(i + 1, close - i - 1);
            auto it = slots.find(name);
            if (close == std::string_view::npos || it == slots.end()) {
                throw ContractError("unresolved template slot in prompt");
            }
            out += it->second;
            i = close + 1;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

}  // namespace

TimeEpoch parse_epoch(std::string_view text) {
    TimeEpoch e;
    e.year = static_cast<int>(parse_field(text.substr(0, text.find('-')), text));
    if (text.find('-') == std::string_view::npos) {
        e.month = e.day = 1;
        return e;
    }
    if (text.size() != 10 && text.size() != 16) throw ConfigError("malformed epoch \"" + std::string(text) + "\"");
    if (text[4] != '-' || text[7] != '-') throw ConfigError("malformed epoch \"" + std::string(text) + "\"");
    e.month = parse_field(text.substr(5, 2), text);
    e.day = parse_field(text.substr(8, 2), text);
    if (text.size() == 16) {
        if (text[10] != ' ' || text[13] != ':') throw ConfigError("malformed epoch \"" + std::string(text) + "\"");
        e.hour = parse_field(text.substr(11, 2), text);
        e.minute = parse_field(text.substr(14, 2), text);
    }
    const std::chrono::year_month_day ymd{std::chrono::year{e.year}, std::chrono::month{e.month},
                                          std::chrono::day{e.day}};
    if (!ymd.ok() || e.hour > 23 || e.minute > 59) {
        throw ConfigError("epoch is not a valid date: \"" + std::string(text) + "\"");
    }
    return e;
}

TimeEpoch profile_epoch(std::string_view name) {
    if (name == "icews14") return {2014, 1, 1};
    if (name == "icews18") return {2018, 1, 1};
    if (name == "icews05-15") return {2005, 1, 1};
    if (name == "gdelt") return {2018, 1, 1};
    if (name == "wiki") return {0, 1, 1};
    throw ConfigError("no epoch profile for dataset \"" + std::string(name) + "\"");
}

std::string render_time(TimestampId t, Granularity granularity, const TimeEpoch& epoch) {
    using namespace std::chrono;
    const sys_days base{year{epoch.year} / month{epoch.month} / day{epoch.day}};
    switch (granularity) {
        case Granularity::Year:
            return fmt::format("{:04d}", epoch.year + static_cast<long long>(t));
        case Granularity::Day: {
            const year_month_day ymd{base + days{t}};
            return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                               static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        }
        case Granularity::Minutes15: {
            const auto instant = sys_time<minutes>{base} + hours{epoch.hour} + minutes{epoch.minute} +
                                 minutes{15LL * t};
            const auto d = floor<days>(instant);
            const year_month_day ymd{d};
            const hh_mm_ss hms{instant - d};
            return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}", static_cast<int>(ymd.year()),
                               static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                               hms.hours().count(), hms.minutes().count());
        }
    }
    throw ConfigError("unknown granularity");
}

std::string render_chains(const ChainSet& cs, const RenderContext& ctx) {
    std::string out;
    for (const auto& chain : cs.chains) {
        if (!out.empty()) out += ' ';
        const auto& s = chain.steps;
        if (s.size() == 1) {
            out += ctx.entity(s[0].subject) + ' ' + ctx.relation(s[0].relation) + ' ' + ctx.entity(s[0].object) +
                   ' ' + ctx.time(s[0].time) + '.';
        } else {
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (i) out += ", ";
                out += ctx.entity(s[i].subject) + ' ' + ctx.relation(s[i].relation) + ' ' +
                       ctx.entity(s[i].object) + " on " + ctx.time(s[i].time);
            }
            out += '.';
        }
    }
    return out;
}

PromptKind explain_kind(Label label) noexcept {
    switch (label) {
        case Label::Yes: return PromptKind::ExplainPositive;
        case Label::No: return PromptKind::ExplainNegative;
        case Label::Unsure: return PromptKind::ExplainNeutral;
    }
    return PromptKind::ExplainPositive;
}

std::string_view prompt_template(PromptKind kind) noexcept {
    switch (kind) {
        case PromptKind::ExplainPositive:
            return "Given the following text: \"we predict that {e_s} {r} {e_o} will happen on {t_q}. "
                   "Here are the reasoning steps: {chains_text}.\"";
        case PromptKind::ExplainNegative:
            return "Given the following text: \"It is plausible that {e_s} {r} {e_o} will not happen on {t_q}. "
                   "Here are the reasoning steps: {chains_text}.\"";
        case PromptKind::ExplainNeutral:
            return "Given the following text: \"It is unsure that {e_s} {r} {e_o} will happen on {t_q}. "
                   "Here are the reasoning steps: {chains_text}.\"";
        case PromptKind::Instruct:
        case PromptKind::InstructNoChains:
            return "Given the following document, is it plausible that {e_s} will {r} {e_o} on {t_q}? "
                   "Please answer yes, no, or unsure then explain your decision.";
    }
    return "";
}

std::string render_explanation_prompt(const LabeledQuery& inst, const RenderContext& ctx) {
    auto chains = render_chains(inst.chains, ctx);
    if (!chains.empty() && chains.back() == '.') chains.pop_back();
    const auto& q = inst.query;
    return fill(prompt_template(explain_kind(inst.label)),
                {{"e_s", ctx.entity(q.subject)},
                 {"r", ctx.relation(q.relation)},
                 {"e_o", ctx.entity(q.object)},
                 {"t_q", ctx.time(q.time)},
                 {"chains_text", chains}}) +
           std::string(kRevision);
}

RenderedInstance render_instruct(const LabeledQuery& inst, const RenderContext& ctx, bool include_chains) {
    const auto& q = inst.query;
    RenderedInstance out;
    out.label = inst.label;
    out.instruction = fill(prompt_template(include_chains ? PromptKind::Instruct : PromptKind::InstructNoChains),
                           {{"e_s", ctx.entity(q.subject)},
                            {"r", ctx.relation(q.relation)},
                            {"e_o", ctx.entity(q.object)},
                            {"t_q", ctx.time(q.time)}});
    if (include_chains) out.input = render_chains(inst.chains, ctx);
    out.target = std::string(display_name(inst.label)) + '.';
    if (inst.explanation && !inst.explanation->empty()) out.target += ' ' + *inst.explanation;
    return out;
}

}  // namespace etr
