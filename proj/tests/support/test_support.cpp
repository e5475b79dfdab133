#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "etr/error.hpp"
#include "etr/pipeline.hpp"
#include "etr/rng.hpp"

namespace fs = std::filesystem;

namespace etr::testing {

fs::path fixture_dir() { return fs::path(ETR_FIXTURE_DIR); }
fs::path toy_dataset_dir() { return fixture_dir() / "toy"; }

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "etr-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
}

TemporalGraph make_graph(std::size_t num_entities, std::size_t num_relations, std::vector<Quadruple> facts,
                         Granularity granularity) {
    std::vector<std::string> el, rl;
    for (std::size_t i = 0; i < num_entities; ++i) el.push_back("e" + std::to_string(i));
    for (std::size_t i = 0; i < num_relations; ++i) rl.push_back("r" + std::to_string(i));
    return TemporalGraph::build(Vocabulary(el), Vocabulary(rl), std::move(facts), granularity);
}

TemporalGraph random_graph(std::uint64_t seed, std::size_t num_entities, std::size_t num_relations,
                           TimestampId num_times, std::size_t num_facts) {
    Rng rng(seed);
    std::vector<Quadruple> facts;
    for (std::size_t i = 0; i < num_facts; ++i) {
        facts.push_back({static_cast<EntityId>(rng.below(num_entities)),
                         static_cast<RelationId>(rng.below(num_relations)),
                         static_cast<EntityId>(rng.below(num_entities)), static_cast<TimestampId>(rng.below(num_times))});
    }
    return make_graph(num_entities, num_relations, std::move(facts));
}

std::set<ChainKey> chain_keys(const ChainSet& cs) {
    std::set<ChainKey> out;
    for (const auto& c : cs.chains) out.insert(c.steps);
    return out;
}

std::set<ChainKey> brute_force_chains(const TemporalGraph& g, EntityId s, EntityId o, TimestampId t_q,
                                      std::uint32_t w) {
    const TimestampId lo = t_q >= w ? t_q - w : 0;
    std::vector<Quadruple> window;
    for (const auto& f : g.facts()) {
        if (f.time >= lo && f.time < t_q) window.push_back(f);
    }
    std::set<ChainKey> out;
    for (const auto& a : window) {
        if (a.subject == s && a.object == o) out.insert({a});
        for (const auto& b : window) {
            if (a.subject == s && b.object == o && a.object == b.subject && a.object != s && a.object != o) {
                out.insert({a, b});
            }
        }
    }
    return out;
}

SeparableTkg separable_tkg() {
    constexpr std::uint32_t kSubjects = 10, kDecoys = 8, kPeriod = 40;
    constexpr TimestampId kTimes = 400;
    constexpr RelationId kDirect = 0, kSideA = 1, kSideB = 2, kNeutralA = 3, kNeutralB = 4;
    // Entity layout per group i: subject 10i, target 10i+1, decoys 10i+2 .. 10i+9.
    std::vector<Quadruple> facts;
    for (TimestampId t = 0; t < kTimes; ++t) {
        for (std::uint32_t i = 0; i < kSubjects; ++i) {
            const EntityId s = 10 * i;
            facts.push_back({s, kDirect, s + 1, t});
            for (std::uint32_t k = 0; k < kDecoys; ++k) {
                if ((t + 5 * k + i) % kPeriod == 0) facts.push_back({s, k % 2 ? kSideB : kSideA, s + 2 + k, t});
            }
        }
    }
    SeparableTkg out{make_graph(10 * kSubjects, 5, std::move(facts)), NeutralRelationTable(5), 299};
    out.neutral.add(kDirect, {kNeutralA, 0.9});
    out.neutral.add(kDirect, {kNeutralB, 0.8});
    return out;
}

TemporalGraph planted_pattern_tkg(TimestampId num_times) {
    constexpr std::uint32_t kEntities = 20, kRelations = 4;
    std::vector<Quadruple> facts;
    for (TimestampId t = 0; t < num_times; ++t) {
        for (EntityId e = 0; e < kEntities; ++e) facts.push_back({e, e % kRelations, (e * 7 + 3) % kEntities, t});
    }
    return make_graph(kEntities, kRelations, std::move(facts));
}

StubServer::StubServer() = default;

void StubServer::start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("stub server could not bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
}

StubServer::~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"etr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace etr::testing
