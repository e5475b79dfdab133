#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "etr/prompt.hpp"
#include "etr/sampler.hpp"

namespace etr {

/// One JSON object per line: id, label, split, query {s, r, o, t, labels,
/// rendered time}, ordering, chains (list of chains, each a list of
/// [s, r, o, t] steps) and the optional explanation.
std::string instance_to_json(const LabeledQuery& inst, const RenderContext& ctx);
void write_instances(const std::filesystem::path& file, const std::vector<LabeledQuery>& insts,
                     const RenderContext& ctx);

/// Parses the id fields back; labels and rendered time are informational.
/// Throws ParseError naming the line for malformed records.
LabeledQuery instance_from_json(const std::string& line, const std::string& file = "<memory>",
                                std::size_t line_no = 0);
std::vector<LabeledQuery> read_instances(const std::filesystem::path& file);

/// Throws ReferenceError naming the instance when an id does not resolve.
void check_instance_ids(const LabeledQuery& inst, std::size_t num_entities, std::size_t num_relations);

}  // namespace etr
