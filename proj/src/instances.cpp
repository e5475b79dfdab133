#include "etr/instances.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "etr/error.hpp"

namespace etr {

using ojson = nlohmann::ordered_json;

std::string instance_to_json(const LabeledQuery& inst, const RenderContext& ctx) {
    const auto& q = inst.query;
    ojson j;
    j["id"] = inst.id;
    j["label"] = to_string(inst.label);
    j["split"] = to_string(inst.split.kind);
    j["train_max_time"] = inst.split.train_max_time;
    j["query"] = {{"s", q.subject},
                  {"r", q.relation},
                  {"o", q.object},
                  {"t", q.time},
                  {"s_label", ctx.entity(q.subject)},
                  {"r_label", ctx.relation(q.relation)},
                  {"o_label", ctx.entity(q.object)},
                  {"time", ctx.time(q.time)}};
    j["ordering"] = to_string(inst.chains.ordering);
    if (inst.chains.ordering == ChainOrdering::Random) j["ordering_seed"] = inst.chains.seed;
    ojson chains = ojson::array();
    for (const auto& c : inst.chains.chains) {
        ojson steps = ojson::array();
        for (const auto& s : c.steps) steps.push_back({s.subject, s.relation, s.object, s.time});
        chains.push_back(std::move(steps));
    }
    j["chains"] = std::move(chains);
    if (inst.explanation) j["explanation"] = *inst.explanation;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

void write_instances(const std::filesystem::path& file, const std::vector<LabeledQuery>& insts,
                     const RenderContext& ctx) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    for (const auto& inst : insts) out << instance_to_json(inst, ctx) << '\n';
    if (!out) throw InputError("write failed for " + file.string());
}

LabeledQuery instance_from_json(const std::string& line, const std::string& file, std::size_t line_no) {
    try {
        const auto j = nlohmann::json::parse(line);
        LabeledQuery inst;
        inst.id = j.at("id").get<std::uint64_t>();
        inst.label = parse_label(j.at("label").get<std::string>());
        const auto split = j.at("split").get<std::string>();
        if (split == "train") {
            inst.split.kind = SplitKind::Train;
        } else if (split == "test") {
            inst.split.kind = SplitKind::Test;
        } else {
            throw ParseError(file, line_no, "unknown split \"" + split + "\"");
        }
        inst.split.train_max_time = j.value("train_max_time", 0u);
        const auto& q = j.at("query");
        inst.query = {q.at("s").get<EntityId>(), q.at("r").get<RelationId>(), q.at("o").get<EntityId>(),
                      q.at("t").get<TimestampId>()};
        inst.chains.subject = inst.query.subject;
        inst.chains.object = inst.query.object;
        inst.chains.ordering = parse_ordering(j.value("ordering", std::string("paths")));
        inst.chains.seed = j.value("ordering_seed", std::uint64_t{0});
        for (const auto& c : j.at("chains")) {
            ReasoningChain chain;
            for (const auto& s : c) {
                if (!s.is_array() || s.size() != 4) throw ParseError(file, line_no, "chain step must be [s,r,o,t]");
                chain.steps.push_back({s[0].get<EntityId>(), s[1].get<RelationId>(), s[2].get<EntityId>(),
                                       s[3].get<TimestampId>()});
            }
            if (chain.steps.empty()) throw ParseError(file, line_no, "empty chain");
            inst.chains.chains.push_back(std::move(chain));
        }
        if (j.contains("explanation") && !j["explanation"].is_null()) {
            inst.explanation = j["explanation"].get<std::string>();
        }
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file, line_no, std::string("malformed instance: ") + e.what());
    } catch (const InputError& e) {
        throw ParseError(file, line_no, e.what());
    }
}

std::vector<LabeledQuery> read_instances(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::vector<LabeledQuery> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(instance_from_json(line, file.string(), line_no));
    }
    return out;
}

void check_instance_ids(const LabeledQuery& inst, std::size_t num_entities, std::size_t num_relations) {
    auto check = [&](const Quadruple& q) {
        if (q.subject >= num_entities || q.object >= num_entities || q.relation >= num_relations) {
            throw ReferenceError("instance " + std::to_string(inst.id) + " references an id outside the table");
        }
    };
    check(inst.query);
    for (const auto& c : inst.chains.chains) {
        for (const auto& s : c.steps) check(s);
    }
}

}  // namespace etr
