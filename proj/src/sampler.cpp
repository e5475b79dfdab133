#include "etr/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "etr/error.hpp"
#include "etr/http.hpp"
#include "etr/rng.hpp"

namespace etr {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kStreamPositives = 1;
constexpr std::uint64_t kStreamNegatives = 2;
constexpr std::uint64_t kStreamNeutrals = 3;
constexpr std::uint64_t kStreamOrdering = 4;

void check_probabilities(const NliProbabilities& p, const std::string& context) {
    for (double v : {p.entailment, p.neutral, p.contradiction}) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw ContractError("NLI probability outside [0,1] for " + context);
        }
    }
    if (std::abs(p.entailment + p.neutral + p.contradiction - 1.0) > 1e-6) {
        throw ContractError("NLI probabilities do not sum to 1 for " + context);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// NLI scorers

HttpNliScorer::HttpNliScorer(std::string url, int timeout_seconds) : timeout_seconds_(timeout_seconds) {
    const auto ep = parse_endpoint(url);
    origin_ = ep.origin;
    path_ = ep.prefix.empty() ? "/" : ep.prefix;
}

NliProbabilities HttpNliScorer::score(const std::string& premise, const std::string& hypothesis) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    const nlohmann::json body{{"premise", premise}, {"hypothesis", hypothesis}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw TransportError("NLI scorer unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500 || res->status == 429) {
        throw TransportError("NLI scorer returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw RequestError("NLI scorer rejected request with HTTP " + std::to_string(res->status),
                           res->status);
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        return {j.at("entailment").get<double>(), j.at("neutral").get<double>(),
                j.at("contradiction").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("malformed NLI response: ") + e.what());
    }
}

void StubNliScorer::set(const std::string& premise, const std::string& hypothesis, NliProbabilities p) {
    table_[{premise, hypothesis}] = p;
}

NliProbabilities StubNliScorer::score(const std::string& premise, const std::string& hypothesis) {
    auto it = table_.find({premise, hypothesis});
    if (it == table_.end()) return {0.0, 0.0, 1.0};
    return it->second;
}

StubNliScorer StubNliScorer::from_relation_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    StubNliScorer stub;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
        if (cols.size() != 5) {
            throw ParseError(file.string(), line_no, "expected 5 tab-separated columns");
        }
        try {
            stub.set(relation_sentence(cols[0]), relation_sentence(cols[1]),
                     {std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])});
        } catch (const std::logic_error&) {
            throw ParseError(file.string(), line_no, "non-numeric probability");
        }
    }
    return stub;
}

std::string relation_sentence(const std::string& relation_label) { return "X " + relation_label + " Y"; }

// ---------------------------------------------------------------------------
// Neutral relation table

const std::vector<NeutralCandidate>& NeutralRelationTable::candidates(RelationId r) const {
    if (r >= rows_.size()) throw ReferenceError("relation id out of table: " + std::to_string(r));
    return rows_[r];
}

void NeutralRelationTable::add(RelationId r, NeutralCandidate c) {
    if (r >= rows_.size() || c.relation >= rows_.size()) {
        throw ReferenceError("relation id out of table");
    }
    if (r == c.relation) throw ContractError("a relation cannot be neutral to itself");
    if (!(c.neutral_probability >= 0.0 && c.neutral_probability <= 1.0)) {
        throw ContractError("neutral probability outside [0,1]");
    }
    auto& row = rows_[r];
    auto pos = std::lower_bound(row.begin(), row.end(), c.relation,
                                [](const NeutralCandidate& a, RelationId id) { return a.relation < id; });
    if (pos != row.end() && pos->relation == c.relation) {
        *pos = c;
    } else {
        row.insert(pos, c);
    }
}

std::size_t NeutralRelationTable::pair_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
}

void NeutralRelationTable::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out.precision(17);
    for (RelationId r = 0; r < rows_.size(); ++r) {
        for (const auto& c : rows_[r]) out << r << '\t' << c.relation << '\t' << c.neutral_probability << '\n';
    }
}

NeutralRelationTable NeutralRelationTable::load(const std::filesystem::path& file, std::size_t num_relations) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    NeutralRelationTable t(num_relations);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        RelationId r = 0, r2 = 0;
        double p = 0.0;
        if (!(ss >> r >> r2 >> p)) throw ParseError(file.string(), line_no, "expected r, r', p");
        t.add(r, {r2, p});
    }
    return t;
}

NeutralRelationTable build_neutral_table(const Vocabulary& relations, NliScorer& nli, double tau,
                                         std::size_t max_in_flight) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    const std::size_t n = relations.size();
    std::vector<std::string> sentences;
    sentences.reserve(n);
    for (const auto& label : relations.labels()) sentences.push_back(relation_sentence(label));

    const std::size_t total = n * n;
    std::vector<double> neutral(total, -1.0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        while (!failed.load()) {
            const std::size_t k = next.fetch_add(1);
            if (k >= total) return;
            const std::size_t r = k / n, r2 = k % n;
            if (r == r2) continue;
            try {
                const auto p = nli.score(sentences[r], sentences[r2]);
                check_probabilities(p, "(" + relations.label(static_cast<RelationId>(r)) + ", " +
                                           relations.label(static_cast<RelationId>(r2)) + ")");
                neutral[k] = p.neutral;
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    const std::size_t threads = std::min(max_in_flight, std::max<std::size_t>(total, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    NeutralRelationTable table(n);
    for (std::size_t k = 0; k < total; ++k) {
        if (neutral[k] > tau) {
            table.add(static_cast<RelationId>(k / n), {static_cast<RelationId>(k % n), neutral[k]});
        }
    }
    spdlog::info("neutral relation table: {} pairs above tau={}", table.pair_count(), tau);
    return table;
}

// ---------------------------------------------------------------------------
// Sampling

TimeRange split_time_range(const TemporalGraph& g, const Split& split) {
    const TimestampId T = g.num_timestamps();
    if (split.kind == SplitKind::Train) {
        if (T == 0) return {1, 0};
        return {0, std::min(split.train_max_time, T - 1)};
    }
    return {split.train_max_time + 1, T == 0 ? 0 : T - 1};
}

namespace {

// Lazily walks the split's facts in a seeded order, yielding those with chains.
class SupportedStream {
  public:
    SupportedStream(const TemporalGraph& g, const Split& split, const SamplerOptions& opts,
                    std::uint64_t seed)
        : g_(g), split_(split), opts_(opts) {
        const auto range = split_time_range(g, split);
        if (range.first <= range.last) {
            const auto facts = g.facts_between(range.first, range.last + 1);
            candidates_.assign(facts.begin(), facts.end());
        }
        Rng rng(derive_seed(seed, kStreamPositives, 0));
        rng.shuffle(std::span<Quadruple>(candidates_));
    }

    /// The k-th chain-supported fact, or nullptr when the split runs out.
    const LabeledQuery* at(std::size_t k) {
        while (supported_.size() <= k && cursor_ < candidates_.size()) {
            const auto& q = candidates_[cursor_++];
            if (q.subject == q.object) continue;
            auto cs = extract_chains(g_, q.subject, q.object, q.time, opts_.chains);
            if (cs.empty()) continue;
            LabeledQuery lq;
            lq.query = q;
            lq.label = Label::Yes;
            lq.split = split_;
            lq.chains = std::move(cs);
            supported_.push_back(std::move(lq));
        }
        return k < supported_.size() ? &supported_[k] : nullptr;
    }

    std::size_t found() const noexcept { return supported_.size(); }

  private:
    const TemporalGraph& g_;
    Split split_;
    SamplerOptions opts_;
    std::vector<Quadruple> candidates_;
    std::size_t cursor_ = 0;
    std::vector<LabeledQuery> supported_;
};

void apply_ordering(LabeledQuery& lq, const SamplerOptions& opts, std::uint64_t seed) {
    lq.chains = order_chains(std::move(lq.chains), opts.ordering, seed);
}

}  // namespace

std::vector<LabeledQuery> sample_positives(const TemporalGraph& g, const Split& split, std::size_t n,
                                           const SamplerOptions& opts, std::uint64_t seed) {
    std::vector<LabeledQuery> out;
    if (n == 0) return out;
    SupportedStream stream(g, split, opts, seed);
    for (std::size_t k = 0; k < n; ++k) {
        const auto* lq = stream.at(k);
        if (!lq) {
            throw ExhaustionError("only " + std::to_string(stream.found()) +
                                      " chain-supported facts in the " +
                                      std::string(to_string(split.kind)) + " range, requested " +
                                      std::to_string(n),
                                  stream.found());
        }
        out.push_back(*lq);
        apply_ordering(out.back(), opts, derive_seed(seed, kStreamOrdering, k));
    }
    return out;
}

std::optional<LabeledQuery> corrupt_object(const TemporalGraph& g, const LabeledQuery& pos,
                                           std::uint64_t seed, const SamplerOptions& opts) {
    const auto& q = pos.query;
    std::vector<EntityId> pool;
    for (const auto e : reachable_endpoints(g, q.subject, q.time, opts.chains)) {
        if (e == q.object) continue;
        if (g.contains({q.subject, q.relation, e, q.time})) continue;
        pool.push_back(e);
    }
    if (pool.empty()) return std::nullopt;
    Rng rng(seed);
    rng.shuffle(std::span<EntityId>(pool));
    for (const auto e : pool) {
        auto cs = extract_chains(g, q.subject, e, q.time, opts.chains);
        if (cs.empty()) continue;
        LabeledQuery neg;
        neg.query = {q.subject, q.relation, e, q.time};
        neg.label = Label::No;
        neg.split = pos.split;
        neg.chains = order_chains(std::move(cs), opts.ordering, mix64(seed));
        return neg;
    }
    return std::nullopt;
}

std::optional<LabeledQuery> neutralize_relation(const LabeledQuery& pos, const NeutralRelationTable& table,
                                                const TemporalGraph& g, std::uint64_t seed) {
    const auto& q = pos.query;
    std::vector<RelationId> pool;
    for (const auto& c : table.candidates(q.relation)) {
        if (!g.contains({q.subject, c.relation, q.object, q.time})) pool.push_back(c.relation);
    }
    if (pool.empty()) return std::nullopt;
    Rng rng(seed);
    const auto pick = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    LabeledQuery neu = pos;
    neu.query.relation = pick;
    neu.label = Label::Unsure;
    neu.explanation.reset();
    return neu;
}

std::vector<LabeledQuery> build_dataset(const TemporalGraph& g, const NeutralRelationTable& table,
                                        const DatasetConfig& cfg) {
    const TimestampId train_max = cfg.train_max_time.value_or(g.default_train_max_time());
    std::vector<LabeledQuery> out;
    out.reserve(cfg.train.total() + cfg.test.total());
    std::set<Quadruple> derived_queries;

    for (const auto kind : {SplitKind::Train, SplitKind::Test}) {
        const auto& counts = kind == SplitKind::Train ? cfg.train : cfg.test;
        if (counts.total() == 0) continue;
        const Split split{train_max, kind};
        // Each split gets its own master seed so train and test are independent.
        const std::uint64_t split_seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(kind), 0);
        SupportedStream stream(g, split, cfg.sampler, split_seed);

        auto exhausted = [&](const char* what, std::size_t got, std::size_t want) {
            return ExhaustionError(std::string("could only build ") + std::to_string(got) + " of " +
                                       std::to_string(want) + " " + what + " for the " +
                                       std::string(to_string(kind)) + " split",
                                   got);
        };

        for (std::size_t k = 0; k < counts.positive; ++k) {
            const auto* lq = stream.at(k);
            if (!lq) throw exhausted("positives", k, counts.positive);
            out.push_back(*lq);
            apply_ordering(out.back(), cfg.sampler, derive_seed(split_seed, kStreamOrdering, k));
        }

        // Negatives and neutrals walk the same supported stream from the start;
        // a positive may seed one of each. Failed attempts and queries already
        // emitted are skipped.
        auto derive = [&](std::size_t want, std::uint64_t stream_id, const char* what, auto&& make) {
            std::size_t made = 0;
            for (std::size_t k = 0; made < want; ++k) {
                const auto* src = stream.at(k);
                if (!src) throw exhausted(what, made, want);
                auto derived = make(*src, derive_seed(split_seed, stream_id, k));
                if (!derived || !derived_queries.insert(derived->query).second) continue;
                out.push_back(std::move(*derived));
                ++made;
            }
        };
        derive(counts.negative, kStreamNegatives, "negatives",
               [&](const LabeledQuery& src, std::uint64_t s) { return corrupt_object(g, src, s, cfg.sampler); });
        derive(counts.neutral, kStreamNeutrals, "neutrals", [&](const LabeledQuery& src, std::uint64_t s) {
            auto neu = neutralize_relation(src, table, g, s);
            if (neu) apply_ordering(*neu, cfg.sampler, mix64(s));
            return neu;
        });
    }

    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
    return out;
}

}  // namespace etr
