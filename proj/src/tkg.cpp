#include "etr/tkg.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "etr/binary_io.hpp"
#include "etr/error.hpp"

namespace etr {

Granularity parse_granularity(std::string_view text) {
    if (text == "day" || text == "Day" || text == "1d") return Granularity::Day;
    if (text == "15min" || text == "minutes15" || text == "Minutes15") return Granularity::Minutes15;
    if (text == "year" || text == "Year" || text == "1y") return Granularity::Year;
    throw ConfigError("unknown granularity \"" + std::string(text) + "\" (expected day, 15min or year)");
}

std::string_view to_string(Granularity g) noexcept {
    switch (g) {
        case Granularity::Day: return "day";
        case Granularity::Minutes15: return "15min";
        case Granularity::Year: return "year";
    }
    return "day";
}

std::string_view to_string(SplitKind k) noexcept { return k == SplitKind::Train ? "train" : "test"; }

std::size_t QuadrupleHash::operator()(const Quadruple& q) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(q.subject) << 32) | q.object;
    h ^= ((static_cast<std::uint64_t>(q.relation) << 32) | q.time) * 0x9e3779b97f4a7c15ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    return static_cast<std::size_t>(h ^ (h >> 32));
}

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (std::uint32_t i = 0; i < labels_.size(); ++i) {
        index_.emplace(labels_[i], i);  // first id wins for repeated labels
    }
}

const std::string& Vocabulary::label(std::uint32_t id) const {
    if (id >= labels_.size()) {
        throw VocabularyError("no label for id " + std::to_string(id));
    }
    return labels_[id];
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TemporalGraph TemporalGraph::build(Vocabulary entities, Vocabulary relations,
                                   std::vector<Quadruple> facts, Granularity granularity,
                                   SourceRanges ranges) {
    TemporalGraph g;
    g.entities_ = std::move(entities);
    g.relations_ = std::move(relations);
    g.granularity_ = granularity;
    g.ranges_ = ranges;
    g.stats_.input_facts = facts.size();

    for (const auto& q : facts) g.check_ids(q);

    std::sort(facts.begin(), facts.end(), TimeMajorLess{});
    facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
    g.stats_.duplicates = g.stats_.input_facts - facts.size();
    if (g.stats_.duplicates > 0) {
        spdlog::info("dropped {} duplicate quadruples", g.stats_.duplicates);
    }
    g.facts_ = std::move(facts);

    TimestampId max_time = 0;
    for (const auto& q : g.facts_) max_time = std::max(max_time, q.time);
    for (const auto* r : {&ranges.train, &ranges.valid, &ranges.test}) {
        if (*r) max_time = std::max(max_time, (*r)->last);
    }
    g.num_timestamps_ = g.facts_.empty() && !ranges.train && !ranges.valid && !ranges.test
                            ? 0
                            : max_time + 1;

    g.time_offsets_.assign(static_cast<std::size_t>(g.num_timestamps_) + 1, 0);
    for (const auto& q : g.facts_) ++g.time_offsets_[q.time + 1];
    std::partial_sum(g.time_offsets_.begin(), g.time_offsets_.end(), g.time_offsets_.begin());

    const std::size_t n_ent = g.entities_.size();
    auto build_side = [&](bool by_subject, std::vector<std::uint32_t>& order,
                          std::vector<std::size_t>& offsets) {
        offsets.assign(n_ent + 1, 0);
        for (const auto& q : g.facts_) ++offsets[(by_subject ? q.subject : q.object) + 1];
        std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
        order.resize(g.facts_.size());
        auto cursor = offsets;
        // facts_ is time-major, so a stable bucket pass keeps each bucket in
        // (time, subject, relation, object) order.
        for (std::uint32_t i = 0; i < g.facts_.size(); ++i) {
            const auto& q = g.facts_[i];
            order[cursor[by_subject ? q.subject : q.object]++] = i;
        }
    };
    build_side(true, g.by_subject_, g.subject_offsets_);
    build_side(false, g.by_object_, g.object_offsets_);

    g.membership_.reserve(g.facts_.size());
    g.membership_.insert(g.facts_.begin(), g.facts_.end());
    return g;
}

std::span<const Quadruple> TemporalGraph::facts_at(TimestampId t) const noexcept {
    return facts_between(t, t + 1);
}

std::span<const Quadruple> TemporalGraph::facts_between(TimestampId first,
                                                        TimestampId last_exclusive) const noexcept {
    last_exclusive = std::min(last_exclusive, num_timestamps_);
    if (first >= last_exclusive) return {};
    const auto begin = time_offsets_[first];
    const auto end = time_offsets_[last_exclusive];
    return std::span<const Quadruple>(facts_).subspan(begin, end - begin);
}

namespace {

// Index range [lo, hi) of the bucket entries whose time falls in [first, last).
template <typename Facts>
std::pair<std::size_t, std::size_t> time_slice(const Facts& facts,
                                               const std::vector<std::uint32_t>& order,
                                               std::size_t lo, std::size_t hi, TimestampId first,
                                               TimestampId last_exclusive) {
    auto begin = order.begin() + static_cast<std::ptrdiff_t>(lo);
    auto end = order.begin() + static_cast<std::ptrdiff_t>(hi);
    auto a = std::partition_point(begin, end, [&](std::uint32_t i) { return facts[i].time < first; });
    auto b = std::partition_point(a, end, [&](std::uint32_t i) { return facts[i].time < last_exclusive; });
    return {static_cast<std::size_t>(a - order.begin()), static_cast<std::size_t>(b - order.begin())};
}

}  // namespace

void TemporalGraph::for_each_from(EntityId subject, TimestampId first, TimestampId last_exclusive,
                                  const std::function<void(const Quadruple&)>& visit) const {
    if (subject >= entities_.size() || first >= last_exclusive) return;
    const auto [a, b] = time_slice(facts_, by_subject_, subject_offsets_[subject],
                                   subject_offsets_[subject + 1], first, last_exclusive);
    for (std::size_t k = a; k < b; ++k) visit(facts_[by_subject_[k]]);
}

std::vector<Quadruple> TemporalGraph::facts_from(EntityId subject, TimestampId first,
                                                 TimestampId last_exclusive) const {
    std::vector<Quadruple> out;
    for_each_from(subject, first, last_exclusive, [&](const Quadruple& q) { out.push_back(q); });
    return out;
}

std::vector<Quadruple> TemporalGraph::facts_into(EntityId object, TimestampId first,
                                                 TimestampId last_exclusive) const {
    std::vector<Quadruple> out;
    if (object >= entities_.size() || first >= last_exclusive) return out;
    const auto [a, b] = time_slice(facts_, by_object_, object_offsets_[object],
                                   object_offsets_[object + 1], first, last_exclusive);
    out.reserve(b - a);
    for (std::size_t k = a; k < b; ++k) out.push_back(facts_[by_object_[k]]);
    return out;
}

bool TemporalGraph::contains(const Quadruple& q) const { return membership_.contains(q); }

void TemporalGraph::check_ids(const Quadruple& q) const {
    if (q.subject >= entities_.size() || q.object >= entities_.size()) {
        throw ReferenceError("entity id out of vocabulary (|E|=" + std::to_string(entities_.size()) +
                             "): " + std::to_string(std::max(q.subject, q.object)));
    }
    if (q.relation >= relations_.size()) {
        throw ReferenceError("relation id out of vocabulary (|R|=" +
                             std::to_string(relations_.size()) + "): " + std::to_string(q.relation));
    }
}

TimestampId TemporalGraph::default_train_max_time() const noexcept {
    if (ranges_.train) return ranges_.train->last;
    return num_timestamps_ == 0 ? 0 : num_timestamps_ - 1;
}

std::span<const Quadruple> facts_in_window(const TemporalGraph& g, TimestampId t_q, std::uint32_t w) {
    if (t_q >= g.num_timestamps()) {
        throw RangeError("query time " + std::to_string(t_q) + " outside [0, " +
                         std::to_string(g.num_timestamps()) + ")");
    }
    if (w == 0) throw RangeError("window size must be >= 1");
    const TimestampId first = t_q > w ? t_q - w : 0;
    return g.facts_between(first, t_q);
}

bool contains_fact(const TemporalGraph& g, const Quadruple& q) {
    g.check_ids(q);
    return g.contains(q);
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        cols.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cols;
}

bool parse_u32(std::string_view s, std::uint32_t& out) {
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::ifstream open_input(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Vocabulary read_vocabulary(const std::filesystem::path& file) {
    auto in = open_input(file);
    std::vector<std::optional<std::string>> slots;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        if (cols.size() != 2) {
            throw ParseError(file.string(), line_no,
                             "expected 2 tab-separated columns, got " + std::to_string(cols.size()));
        }
        std::uint32_t id = 0;
        if (!parse_u32(cols[1], id)) {
            throw ParseError(file.string(), line_no, "non-integer id \"" + std::string(cols[1]) + "\"");
        }
        if (id >= slots.size()) slots.resize(static_cast<std::size_t>(id) + 1);
        if (slots[id]) {
            throw VocabularyError(file.string() + ":" + std::to_string(line_no) + ": duplicate id " +
                                  std::to_string(id));
        }
        slots[id] = std::string(cols[0]);
    }
    std::vector<std::string> labels;
    labels.reserve(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i]) {
            throw VocabularyError(file.string() + ": ids are not dense, missing id " + std::to_string(i));
        }
        labels.push_back(std::move(*slots[i]));
    }
    return Vocabulary(std::move(labels));
}

std::vector<Quadruple> read_quadruples(const std::filesystem::path& file, std::size_t num_entities,
                                       std::size_t num_relations, std::uint32_t time_unit) {
    if (time_unit == 0) throw ConfigError("time unit must be >= 1");
    auto in = open_input(file);
    std::vector<Quadruple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        // Some public releases carry a trailing fifth column (always 0); four
        // columns are required, a fifth is tolerated only when it is an integer.
        if (cols.size() != 4 && cols.size() != 5) {
            throw ParseError(file.string(), line_no,
                             "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
        }
        std::uint32_t v[5] = {};
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (!parse_u32(cols[c], v[c])) {
                throw ParseError(file.string(), line_no,
                                 "non-integer value \"" + std::string(cols[c]) + "\" in column " +
                                     std::to_string(c + 1));
            }
        }
        if (v[0] >= num_entities || v[2] >= num_entities) {
            throw ReferenceError(file.string() + ":" + std::to_string(line_no) +
                                 ": entity id out of vocabulary");
        }
        if (v[1] >= num_relations) {
            throw ReferenceError(file.string() + ":" + std::to_string(line_no) +
                                 ": relation id out of vocabulary");
        }
        if (v[3] % time_unit != 0) {
            throw ParseError(file.string(), line_no,
                             "timestamp " + std::to_string(v[3]) + " not a multiple of time unit " +
                                 std::to_string(time_unit));
        }
        out.push_back({v[0], v[1], v[2], v[3] / time_unit});
    }
    return out;
}

TemporalGraph parse_dataset(const std::filesystem::path& dir, const ParseOptions& opts) {
    auto entities = read_vocabulary(dir / "entity2id.txt");
    auto relations = read_vocabulary(dir / "relation2id.txt");

    TemporalGraph::SourceRanges ranges;
    std::vector<Quadruple> all;
    auto load = [&](const char* name, std::optional<TimeRange>& range, bool required) {
        const auto path = dir / name;
        if (!std::filesystem::exists(path)) {
            if (required) throw InputError("missing " + path.string());
            return;
        }
        auto facts = read_quadruples(path, entities.size(), relations.size(), opts.time_unit);
        if (!facts.empty()) {
            auto [lo, hi] = std::minmax_element(facts.begin(), facts.end(),
                                                [](const auto& a, const auto& b) { return a.time < b.time; });
            range = TimeRange{lo->time, hi->time};
        }
        all.insert(all.end(), facts.begin(), facts.end());
    };
    load("train.txt", ranges.train, true);
    load("valid.txt", ranges.valid, false);
    load("test.txt", ranges.test, false);
    return TemporalGraph::build(std::move(entities), std::move(relations), std::move(all),
                                opts.granularity, ranges);
}

void write_quadruples(const std::filesystem::path& file, std::span<const Quadruple> facts) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    for (const auto& q : facts) {
        out << q.subject << '\t' << q.relation << '\t' << q.object << '\t' << q.time << '\n';
    }
}

void write_snapshot(const std::filesystem::path& file, const TemporalGraph& g) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    binio::write_magic(out, "TKG1");
    binio::write_u32(out, static_cast<std::uint32_t>(g.entities().size()));
    binio::write_u32(out, static_cast<std::uint32_t>(g.relations().size()));
    binio::write_u32(out, static_cast<std::uint32_t>(g.facts().size()));
    for (const auto& q : g.facts()) {
        binio::write_u32(out, q.subject);
        binio::write_u32(out, q.relation);
        binio::write_u32(out, q.object);
        binio::write_u32(out, q.time);
    }
}

Snapshot read_snapshot(const std::filesystem::path& file) {
    auto in = open_input(file);
    binio::expect_magic(in, "TKG1", file.string());
    Snapshot s;
    s.num_entities = binio::read_u32(in, "snapshot header");
    s.num_relations = binio::read_u32(in, "snapshot header");
    const auto n = binio::read_u32(in, "snapshot header");
    s.facts.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Quadruple q;
        q.subject = binio::read_u32(in, "snapshot fact");
        q.relation = binio::read_u32(in, "snapshot fact");
        q.object = binio::read_u32(in, "snapshot fact");
        q.time = binio::read_u32(in, "snapshot fact");
        s.facts.push_back(q);
    }
    return s;
}

}  // namespace etr
