#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "etr/digest.hpp"
#include "etr/error.hpp"
#include "etr/llm_client.hpp"
#include "test_support.hpp"

using namespace etr;
using namespace etr::testing;

namespace {

ChatRequest request(const std::string& id, const std::string& text) {
    ChatRequest r;
    r.instance_id = id;
    r.model = "stub-model";
    r.messages = {{"system", "be brief"}, {"user", text}};
    return r;
}

ClientConfig fast_config(const std::string& base, std::uint32_t attempts = 5) {
    ClientConfig c;
    c.base_url = base;
    c.max_attempts = attempts;
    c.initial_backoff = std::chrono::milliseconds(1);
    c.max_backoff = std::chrono::milliseconds(4);
    c.timeout_seconds = 5;
    return c;
}

std::string completion(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

std::string last_user_message(const std::string& body) {
    const auto j = nlohmann::json::parse(body);
    return j.at("messages").back().at("content").get<std::string>();
}

void echo(const httplib::Request& req, httplib::Response& res) {
    res.set_content(completion("echo: " + last_user_message(req.body)), "application/json");
}

}  // namespace

TEST_CASE("echo completion on the first attempt") {
    StubServer stub;
    std::string seen_auth;
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        echo(req, res);
    });
    stub.start();
    auto cfg = fast_config(stub.base_url());
    cfg.api_key = "k123";
    const LlmClient client(cfg);
    const auto req = request("7", "hello");
    const auto rec = client.generate(req);
    CHECK(rec.output_text == "echo: hello");
    CHECK(rec.attempt == 1);
    CHECK(rec.instance_id == "7");
    CHECK(rec.model == "stub-model");
    CHECK(rec.prompt_hash == sha256_hex(req.body()));
    CHECK(rec.prompt_hash == prompt_hash(req));
    CHECK(seen_auth == "Bearer k123");
}

TEST_CASE("base URL with a path prefix") {
    StubServer stub;
    stub.server().Post("/api/v1/chat/completions", echo);
    stub.start();
    const LlmClient client(fast_config(stub.base_url() + "/api"));
    CHECK(client.generate(request("1", "x")).output_text == "echo: x");
}

TEST_CASE("429 twice then success reports attempt 3") {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++calls <= 2) {
            res.status = 429;
            return;
        }
        echo(req, res);
    });
    stub.start();
    const auto rec = LlmClient(fast_config(stub.base_url())).generate(request("1", "retry"));
    CHECK(rec.attempt == 3);
    CHECK(calls == 3);
    CHECK(rec.output_text == "echo: retry");
}

TEST_CASE("5xx is retried") {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++calls == 1) {
            res.status = 503;
            return;
        }
        echo(req, res);
    });
    stub.start();
    CHECK(LlmClient(fast_config(stub.base_url())).generate(request("1", "x")).attempt == 2);
}

TEST_CASE("malformed bodies exhaust the retry budget") {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.set_content("{\"choices\": ", "application/json");
    });
    stub.start();
    CHECK_THROWS_AS(LlmClient(fast_config(stub.base_url(), 3)).generate(request("1", "x")), TransportError);
    CHECK(calls == 3);
}

TEST_CASE("client errors are not retried") {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 400;
        res.set_content("{\"error\": \"bad model\"}", "application/json");
    });
    stub.start();
    try {
        LlmClient(fast_config(stub.base_url())).generate(request("1", "x"));
        FAIL("expected RequestError");
    } catch (const RequestError& e) {
        CHECK(e.status() == 400);
        CHECK(std::string(e.what()).find("bad model") != std::string::npos);
    }
    CHECK(calls == 1);
}

TEST_CASE("empty completion is a content error") {
    StubServer stub;
    stub.server().Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("  \n"), "application/json");
    });
    stub.start();
    CHECK_THROWS_AS(LlmClient(fast_config(stub.base_url())).generate(request("1", "x")), ContentError);
}

TEST_CASE("unreachable service") {
    CHECK_THROWS_AS(LlmClient(fast_config("http://127.0.0.1:1", 2)).generate(request("1", "x")), TransportError);
}

TEST_CASE("request validation") {
    StubServer stub;
    stub.server().Post("/v1/chat/completions", echo);
    stub.start();
    const LlmClient client(fast_config(stub.base_url()));
    auto no_user = request("1", "x");
    no_user.messages.pop_back();
    CHECK_THROWS_AS(client.generate(no_user), ConfigError);
    auto hot = request("1", "x");
    hot.temperature = 2.5;
    CHECK_THROWS_AS(client.generate(hot), ConfigError);
    hot.temperature = 2.0;
    CHECK_NOTHROW(client.generate(hot));
    CHECK_THROWS_AS(LlmClient(fast_config(stub.base_url(), 0)), ConfigError);
    CHECK_THROWS_AS(client.generate_batch({request("1", "x")}, 0), ConfigError);
}

TEST_CASE("request body is canonical") {
    const auto a = request("1", "same");
    auto b = request("2", "same");
    CHECK(a.body() == b.body());
    b.temperature = 0.1;
    CHECK(a.body() != b.body());
    const auto j = nlohmann::json::parse(a.body());
    CHECK(j.at("model") == "stub-model");
    CHECK(j.at("max_tokens") == 512);
    CHECK(j.at("messages").size() == 2);
}

TEST_CASE("batch keeps order and bounds concurrency") {
    StubServer stub;
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(40));
        --in_flight;
        if (last_user_message(req.body) == "poison") {
            res.status = 422;
            return;
        }
        echo(req, res);
    });
    stub.start();
    const LlmClient client(fast_config(stub.base_url()));
    std::vector<ChatRequest> reqs;
    for (int i = 0; i < 10; ++i) reqs.push_back(request(std::to_string(i), i == 6 ? "poison" : "m" + std::to_string(i)));
    const auto out = client.generate_batch(reqs, 3);
    REQUIRE(out.size() == 10);
    CHECK(peak <= 3);
    CHECK(peak >= 2);
    for (int i = 0; i < 10; ++i) {
        if (i == 6) {
            CHECK_FALSE(out[i].ok());
            CHECK(out[i].error.find("422") != std::string::npos);
        } else {
            REQUIRE(out[i].ok());
            CHECK(out[i].record->instance_id == std::to_string(i));
            CHECK(out[i].record->output_text == "echo: m" + std::to_string(i));
        }
    }
    CHECK(client.generate_batch({}, 3).empty());
}

TEST_CASE("ledger persists, skips torn lines, and keys on id and hash") {
    TempDir dir;
    const auto file = dir / "gen.jsonl";
    GenerationRecord r1{"1", "h1", "first \"quoted\"\nline", "m", 12, 1};
    GenerationRecord r2{"2", "h2", "second", "m", 30, 3};
    {
        GenerationLedger ledger(file);
        CHECK(ledger.size() == 0);
        ledger.append(r1);
        ledger.append(r2);
        CHECK(ledger.contains("1", "h1"));
        CHECK_FALSE(ledger.contains("1", "h2"));
    }
    const auto intact = read_file(file);
    write_file(file, intact + "{\"instance_id\": \"3\", \"prompt");
    GenerationLedger reopened(file);
    CHECK(reopened.size() == 2);
    const auto back = reopened.find("1", "h1");
    REQUIRE(back.has_value());
    CHECK(back->output_text == r1.output_text);
    CHECK(back->latency_ms == 12);
    CHECK(reopened.find("2", "h2")->attempt == 3);
    CHECK_FALSE(reopened.find("3", "h3").has_value());

    reopened.append({"3", "h3", "third", "m", 1, 1});
    CHECK(GenerationLedger(file).size() == 3);
    CHECK(record_from_json(record_to_json(r2)).output_text == "second");
    CHECK_THROWS_AS(record_from_json("{}"), InputError);
}
