#include <algorithm>
#include <cstdlib>
#include <map>

#include <doctest.h>

#include "etr/error.hpp"
#include "etr/rng.hpp"
#include "etr/tkg.hpp"
#include "test_support.hpp"

using namespace etr;
using namespace etr::testing;

namespace {

void write_vocab(const TempDir& dir, std::size_t ne, std::size_t nr) {
    std::string e, r;
    for (std::size_t i = 0; i < ne; ++i) e += "entity " + std::to_string(i) + "\t" + std::to_string(i) + "\n";
    for (std::size_t i = 0; i < nr; ++i) r += "relation " + std::to_string(i) + "\t" + std::to_string(i) + "\n";
    write_file(dir / "entity2id.txt", e);
    write_file(dir / "relation2id.txt", r);
}

std::vector<Quadruple> sorted(std::vector<Quadruple> v) {
    std::sort(v.begin(), v.end());
    return v;
}

const std::vector<Quadruple> kSix = {{0, 0, 1, 0}, {1, 1, 2, 1}, {0, 1, 2, 1}, {2, 0, 0, 2}, {1, 0, 0, 3}, {0, 0, 1, 3}};

}  // namespace

TEST_CASE("six-fact toy file: indexes agree with a linear scan") {
    TempDir dir;
    write_vocab(dir, 3, 2);
    std::string lines;
    for (const auto& q : kSix) {
        lines += std::to_string(q.subject) + "\t" + std::to_string(q.relation) + "\t" + std::to_string(q.object) +
                 "\t" + std::to_string(q.time) + "\n";
    }
    write_file(dir / "train.txt", lines);
    const auto g = parse_dataset(dir.path());
    CHECK(g.facts().size() == 6);
    CHECK(g.entities().label(2) == "entity 2");
    CHECK(g.relations().label(1) == "relation 1");
    CHECK(g.num_timestamps() == 4);

    std::size_t per_time_total = 0;
    for (TimestampId t = 0; t < g.num_timestamps(); ++t) {
        std::vector<Quadruple> expect;
        for (const auto& q : kSix) {
            if (q.time == t) expect.push_back(q);
        }
        const auto got = g.facts_at(t);
        CHECK(sorted({got.begin(), got.end()}) == sorted(expect));
        per_time_total += got.size();
    }
    CHECK(per_time_total == g.facts().size());

    for (EntityId s = 0; s < 3; ++s) {
        for (TimestampId lo = 0; lo <= 4; ++lo) {
            for (TimestampId hi = lo; hi <= 4; ++hi) {
                std::vector<Quadruple> from, into;
                for (const auto& q : kSix) {
                    if (q.time >= lo && q.time < hi && q.subject == s) from.push_back(q);
                    if (q.time >= lo && q.time < hi && q.object == s) into.push_back(q);
                }
                CHECK(sorted(g.facts_from(s, lo, hi)) == sorted(from));
                CHECK(sorted(g.facts_into(s, lo, hi)) == sorted(into));
            }
        }
    }
}

TEST_CASE("empty facts file gives an empty graph and empty windows") {
    TempDir dir;
    write_vocab(dir, 3, 2);
    write_file(dir / "train.txt", "");
    const auto g = parse_dataset(dir.path());
    CHECK(g.facts().empty());
    CHECK(g.entities().size() == 3);
    CHECK(g.facts_from(0, 0, 100).empty());
    CHECK(g.facts_between(0, 100).empty());
}

TEST_CASE("ICEWS14 statistics when the dataset is available") {
    const char* dir = std::getenv("ETR_ICEWS14_DIR");
    if (!dir) {
        MESSAGE("ETR_ICEWS14_DIR not set; skipping the full-size ICEWS14 check");
        return;
    }
    const auto g = parse_dataset(dir, {Granularity::Day, 24});
    CHECK(g.entities().size() == 7128);
    CHECK(g.relations().size() == 230);
    CHECK(g.source_ranges().train.has_value());
    CHECK(read_quadruples(std::filesystem::path(dir) / "train.txt", 7128, 230, 24).size() == 74854);
}

TEST_CASE("parse errors carry file and line") {
    TempDir dir;
    write_vocab(dir, 3, 2);
    SUBCASE("wrong column count") {
        write_file(dir / "train.txt", "0\t0\t1\t0\n0\t1\t2\n");
        try {
            parse_dataset(dir.path());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("train.txt:2") != std::string::npos);
        }
    }
    SUBCASE("non-integer id") {
        write_file(dir / "train.txt", "0\tx\t1\t0\n");
        CHECK_THROWS_AS(parse_dataset(dir.path()), ParseError);
    }
    SUBCASE("id out of vocabulary") {
        write_file(dir / "train.txt", "0\t0\t3\t0\n");
        CHECK_THROWS_AS(parse_dataset(dir.path()), ReferenceError);
        write_file(dir / "train.txt", "0\t2\t1\t0\n");
        CHECK_THROWS_AS(parse_dataset(dir.path()), ReferenceError);
    }
    SUBCASE("duplicate vocabulary id") {
        write_file(dir / "entity2id.txt", "a\t0\nb\t1\nc\t1\n");
        write_file(dir / "train.txt", "");
        CHECK_THROWS_AS(parse_dataset(dir.path()), VocabularyError);
    }
    SUBCASE("missing train file") {
        CHECK_THROWS_AS(parse_dataset(dir.path()), InputError);
    }
    SUBCASE("trailing integer fifth column is tolerated") {
        write_file(dir / "train.txt", "0\t0\t1\t0\t0\n");
        CHECK(parse_dataset(dir.path()).facts().size() == 1);
    }
}

TEST_CASE("time unit divides raw timestamps") {
    TempDir dir;
    write_vocab(dir, 2, 1);
    write_file(dir / "train.txt", "0\t0\t1\t0\n0\t0\t1\t48\n");
    const auto g = parse_dataset(dir.path(), {Granularity::Day, 24});
    CHECK(g.num_timestamps() == 3);
    CHECK(g.contains({0, 0, 1, 2}));
    write_file(dir / "train.txt", "0\t0\t1\t5\n");
    CHECK_THROWS_AS(parse_dataset(dir.path(), {Granularity::Day, 24}), ParseError);
}

TEST_CASE("duplicates are kept once and counted") {
    const auto g = make_graph(2, 1, {{0, 0, 1, 0}, {0, 0, 1, 0}, {1, 0, 0, 0}});
    CHECK(g.facts().size() == 2);
    CHECK(g.build_stats().input_facts == 3);
    CHECK(g.build_stats().duplicates == 1);
}

TEST_CASE("facts_in_window examples") {
    const auto g = make_graph(2, 1, {{0, 0, 1, 5}, {0, 0, 1, 9}, {0, 0, 1, 10}});
    std::vector<TimestampId> times;
    for (const auto& q : facts_in_window(g, 10, 5)) times.push_back(q.time);
    CHECK(times == std::vector<TimestampId>{5, 9});

    times.clear();
    for (const auto& q : facts_in_window(g, 10, 50)) times.push_back(q.time);
    CHECK(times == std::vector<TimestampId>{5, 9});

    CHECK(facts_in_window(g, 0, 5).empty());
    CHECK_THROWS_AS(facts_in_window(g, 11, 5), RangeError);
    CHECK_THROWS_AS(facts_in_window(g, 10, 0), RangeError);
}

TEST_CASE("facts_in_window equals a full-scan filter on random graphs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = random_graph(seed, 8, 3, 40, 300);
        for (TimestampId t = 0; t < g.num_timestamps(); t += 3) {
            for (std::uint32_t w : {1u, 2u, 7u, 30u, 100u}) {
                std::vector<Quadruple> expect;
                const TimestampId lo = t >= w ? t - w : 0;
                for (const auto& q : g.facts()) {
                    if (q.time >= lo && q.time < t) expect.push_back(q);
                }
                const auto got = facts_in_window(g, t, w);
                for (const auto& q : got) {
                    CHECK(q.time >= lo);
                    CHECK(q.time < t);
                }
                CHECK(sorted({got.begin(), got.end()}) == sorted(expect));
            }
        }
    }
}

TEST_CASE("contains_fact") {
    const auto g = random_graph(7, 10, 4, 30, 200);
    for (const auto& q : g.facts()) {
        CHECK(contains_fact(g, q));
        Quadruple later = q;
        later.time += 1;
        const bool present = std::find(g.facts().begin(), g.facts().end(), later) != g.facts().end();
        CHECK(contains_fact(g, later) == present);
    }

    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Quadruple q{static_cast<EntityId>(rng.below(10)), static_cast<RelationId>(rng.below(4)),
                          static_cast<EntityId>(rng.below(10)), static_cast<TimestampId>(rng.below(30))};
        const bool scan = std::find(g.facts().begin(), g.facts().end(), q) != g.facts().end();
        CHECK(contains_fact(g, q) == scan);
    }
    CHECK_THROWS_AS(contains_fact(g, {10, 0, 0, 0}), ReferenceError);
}

TEST_CASE("quadruple file and snapshot round trips") {
    const auto g = random_graph(3, 12, 5, 50, 400);
    TempDir dir;
    write_quadruples(dir / "facts.txt", g.facts());
    const auto back = read_quadruples(dir / "facts.txt", 12, 5);
    CHECK(back == std::vector<Quadruple>(g.facts().begin(), g.facts().end()));

    write_snapshot(dir / "g.tkg", g);
    const auto snap = read_snapshot(dir / "g.tkg");
    CHECK(snap.num_entities == 12);
    CHECK(snap.num_relations == 5);
    CHECK(snap.facts == back);
    CHECK(read_file(dir / "g.tkg").substr(0, 4) == "TKG1");
}

TEST_CASE("index build is deterministic regardless of input order") {
    const auto source = random_graph(5, 9, 3, 20, 150);
    auto facts = std::vector<Quadruple>(source.facts().begin(), source.facts().end());
    const auto a = make_graph(9, 3, facts);
    Rng rng(1);
    rng.shuffle(std::span<Quadruple>(facts));
    const auto b = make_graph(9, 3, facts);
    CHECK(std::vector<Quadruple>(a.facts().begin(), a.facts().end()) ==
          std::vector<Quadruple>(b.facts().begin(), b.facts().end()));
    CHECK(a.facts_from(2, 0, 20) == b.facts_from(2, 0, 20));
}

TEST_CASE("default train boundary uses the train file range") {
    TempDir dir;
    write_vocab(dir, 2, 1);
    write_file(dir / "train.txt", "0\t0\t1\t0\n0\t0\t1\t4\n");
    write_file(dir / "test.txt", "0\t0\t1\t9\n");
    const auto g = parse_dataset(dir.path());
    CHECK(g.default_train_max_time() == 4);
    CHECK(g.num_timestamps() == 10);
}
