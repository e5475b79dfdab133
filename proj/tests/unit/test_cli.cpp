#include <atomic>
#include <filesystem>
#include <fstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "etr/instances.hpp"
#include "test_support.hpp"

using namespace etr;
using namespace etr::testing;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> sample_args(const fs::path& out, const std::string& counts = "4,4,4") {
    return {"sample",      "--dataset", toy_dataset_dir().string(), "--dataset-name", "icews14", "--counts", counts,
            "--nli-stub", (toy_dataset_dir() / "nli_stub.tsv").string(), "--seed", "3", "--out", out.string()};
}

std::size_t line_count(const fs::path& file) {
    std::ifstream in(file);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

nlohmann::json manifest(const fs::path& dir, const std::string& stage) {
    return nlohmann::json::parse(read_file(dir / ("manifest-" + stage + ".json")));
}

std::string chat_reply(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

}  // namespace

TEST_CASE("sample writes instances and a manifest") {
    TempDir dir;
    REQUIRE(run(sample_args(dir.path())) == 0);
    CHECK(line_count(dir / "instances.jsonl") == 12);
    const auto insts = read_instances(dir / "instances.jsonl");
    std::array<int, 3> per{};
    for (const auto& i : insts) ++per[index_of(i.label)];
    CHECK(per == std::array<int, 3>{4, 4, 4});
    const auto m = manifest(dir.path(), "sample");
    CHECK(m.at("stage") == "sample");
    CHECK(m.at("config").at("window") == 30);
    CHECK(m.at("outputs").size() >= 1);
    CHECK(fs::exists(dir / "neutral_table.tsv"));
    CHECK_FALSE(fs::exists(dir / ".etr.lock"));
}

TEST_CASE("reruns are byte-identical") {
    TempDir a, b;
    REQUIRE(run(sample_args(a.path())) == 0);
    REQUIRE(run(sample_args(b.path())) == 0);
    CHECK(read_file(a / "instances.jsonl") == read_file(b / "instances.jsonl"));
    CHECK(read_file(a / "neutral_table.tsv") == read_file(b / "neutral_table.tsv"));
    const auto first = read_file(a / "manifest-sample.json");
    REQUIRE(run(sample_args(a.path())) == 0);
    CHECK(read_file(a / "manifest-sample.json") == first);
}

TEST_CASE("defaults, config file and flags layer in that order") {
    TempDir dir;
    write_file(dir / "cfg.yaml", "window: 5\ntau: 0.8\nseed: 9\n");
    auto args = sample_args(dir.path(), "2,2,2");
    args.insert(args.end(), {"--config", (dir / "cfg.yaml").string(), "--window", "12"});
    REQUIRE(run(args) == 0);
    const auto cfg = manifest(dir.path(), "sample").at("config");
    CHECK(cfg.at("window") == 12);                       // flag beats file
    CHECK(cfg.at("tau").get<double>() == doctest::Approx(0.8));  // file beats default
    CHECK(cfg.at("max_chains") == 60);                   // default
    CHECK(cfg.at("seed") == 3);                          // flag beats file
}

TEST_CASE("usage errors exit with status 2") {
    TempDir dir;
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"sample", "--no-such-flag"}) == 2);
    write_file(dir / "bad.yaml", "windw: 5\n");
    auto args = sample_args(dir.path());
    args.insert(args.end(), {"--config", (dir / "bad.yaml").string()});
    CHECK(run(args) == 2);
    CHECK(run({"sample", "--dataset", toy_dataset_dir().string(), "--ordering", "sideways", "--out",
               dir.path().string()}) == 2);
}

TEST_CASE("stage failures exit with status 1") {
    TempDir dir;
    CHECK(run({"ingest", "--dataset", (dir / "missing").string(), "--out", dir.path().string()}) == 1);
    CHECK(run(sample_args(dir.path(), "100000,0,0")) == 1);
}

TEST_CASE("a held lock blocks a second writer") {
    TempDir dir;
    write_file(dir / ".etr.lock", "pid 1\n");
    CHECK(run(sample_args(dir.path())) == 1);
    CHECK_FALSE(fs::exists(dir / "instances.jsonl"));
    fs::remove(dir / ".etr.lock");
    CHECK(run(sample_args(dir.path())) == 0);
}

TEST_CASE("ingest writes the snapshot and stats") {
    TempDir dir;
    REQUIRE(run({"ingest", "--dataset", toy_dataset_dir().string(), "--out", dir.path().string()}) == 0);
    CHECK(read_file(dir / "graph.tkg").substr(0, 4) == "TKG1");
    const auto stats = nlohmann::json::parse(read_file(dir / "graph_stats.json"));
    CHECK(stats.at("facts") == 1192);
    CHECK(fs::exists(dir / "manifest-ingest.json"));
}

TEST_CASE("explain and infer against a stub model service") {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        const auto prompt =
            nlohmann::json::parse(req.body).at("messages").back().at("content").get<std::string>();
        if (prompt.rfind("Given the following document", 0) == 0) {
            res.set_content(chat_reply("Yes. The history supports it."), "application/json");
        } else {
            res.set_content(chat_reply("Explained: " + prompt.substr(27, 30)), "application/json");
        }
    });
    stub.start();

    TempDir dir;
    REQUIRE(run(sample_args(dir.path(), "2,1,1")) == 0);
    const std::vector<std::string> common{"--dataset", toy_dataset_dir().string(), "--dataset-name", "icews14",
                                          "--api-base", stub.base_url(), "--out", dir.path().string()};
    auto explain = std::vector<std::string>{"explain", "--task", "explain"};
    explain.insert(explain.end(), common.begin(), common.end());
    REQUIRE(run(explain) == 0);
    CHECK(calls == 4);
    CHECK(line_count(dir / "generations.jsonl") == 4);
    CHECK(line_count(dir / "instruct.jsonl") == 4);
    const auto explained = read_instances(dir / "instances.explained.jsonl");
    REQUIRE(explained.size() == 4);
    for (const auto& i : explained) {
        REQUIRE(i.explanation.has_value());
        CHECK(i.explanation->rfind("Explained: ", 0) == 0);
    }
    const auto first_instruct = nlohmann::json::parse(read_file(dir / "instruct.jsonl").substr(0, read_file(dir / "instruct.jsonl").find('\n')));
    CHECK(first_instruct.at("output").get<std::string>().rfind("Yes. Explained: ", 0) == 0);

    const auto ledger = read_file(dir / "generations.jsonl");
    REQUIRE(run(explain) == 0);
    CHECK(calls == 4);
    CHECK(read_file(dir / "generations.jsonl") == ledger);

    auto infer = std::vector<std::string>{"explain", "--task", "infer", "--split", "all"};
    infer.insert(infer.end(), common.begin(), common.end());
    REQUIRE(run(infer) == 0);
    CHECK(calls == 8);
    CHECK(line_count(dir / "predictions.jsonl") == 4);

    REQUIRE(run({"evaluate", "--predictions", (dir / "predictions.jsonl").string(), "--instances",
                 (dir / "instances.explained.jsonl").string(), "--split", "all", "--out", dir.path().string()}) == 0);
    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    CHECK(report.dump().find("overall") != std::string::npos);
    CHECK(fs::exists(dir / "report.md"));
}

TEST_CASE("evaluate rejects a prediction count mismatch without writing a report") {
    TempDir dir;
    REQUIRE(run(sample_args(dir.path(), "2,1,1")) == 0);
    write_file(dir / "preds.jsonl", "{\"id\": 0, \"output_text\": \"Yes.\"}\n");
    CHECK(run({"evaluate", "--predictions", (dir / "preds.jsonl").string(), "--split", "all", "--out",
               dir.path().string()}) != 0);
    CHECK_FALSE(fs::exists(dir / "report.json"));
    CHECK_FALSE(fs::exists(dir / "report.md"));
}

TEST_CASE("graph baseline stages end to end") {
    TempDir dir;
    const std::string out = dir.path().string();
    const std::string ds = toy_dataset_dir().string();
    auto args = sample_args(dir.path(), "6,6,6");
    args.insert(args.end(), {"--test-counts", "3,3,3"});
    REQUIRE(run(args) == 0);
    REQUIRE(run({"train-encoder", "--dataset", ds, "--ds", "8", "--hidden", "8", "--encoder-epochs", "2", "--out",
                 out}) == 0);
    CHECK(fs::exists(dir / "embeddings.etre"));
    CHECK(nlohmann::json::parse(read_file(dir / "encoder_log.json")).dump().find("epoch_loss") != std::string::npos);
    const auto emb = read_file(dir / "embeddings.etre");
    REQUIRE(run({"train-encoder", "--dataset", ds, "--ds", "8", "--hidden", "8", "--encoder-epochs", "2", "--out",
                 out}) == 0);
    CHECK(read_file(dir / "embeddings.etre") == emb);
    CHECK(run({"train-encoder", "--dataset", ds, "--ds", "16", "--resume", (dir / "embeddings.etre").string(),
               "--out", out}) == 2);

    REQUIRE(run({"export-tokens", "--dataset", ds, "--out", out}) == 0);
    CHECK(read_file(dir / "tokens.etrt").substr(0, 4) == "ETRT");
    REQUIRE(run({"train-classifier", "--dataset", ds, "--classifier-epochs", "20", "--out", out}) == 0);
    REQUIRE(run({"evaluate", "--classifier", (dir / "classifier.etrc").string(), "--out", out}) == 0);
    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    CHECK(report.dump().find("per_class") != std::string::npos);

    fs::create_directories(dir / "summary");
    REQUIRE(run({"report", "--reports", (dir / "report.json").string(), "--names", "graph", "--out",
                 (dir / "summary").string()}) == 0);
    CHECK(read_file(dir / "summary" / "summary.md").find("graph") != std::string::npos);
}
