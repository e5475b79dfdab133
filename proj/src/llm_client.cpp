#include "etr/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "etr/digest.hpp"
#include "etr/error.hpp"
#include "etr/http.hpp"

namespace etr {

void ChatRequest::validate() const {
    const bool has_user =
        std::any_of(messages.begin(), messages.end(), [](const ChatMessage& m) { return m.role == "user"; });
    if (!has_user) throw ConfigError("chat request needs at least one user message");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
}

std::string ChatRequest::body() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    const nlohmann::json j{{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
    return j.dump();
}

std::string prompt_hash(const ChatRequest& req) { return sha256_hex(req.body()); }

ClientConfig ClientConfig::from_env() {
    ClientConfig c;
    if (const char* base = std::getenv("ETR_API_BASE"); base && *base) c.base_url = base;
    if (const char* key = std::getenv("ETR_API_KEY"); key) c.api_key = key;
    return c;
}

LlmClient::LlmClient(ClientConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.max_attempts == 0) throw ConfigError("max_attempts must be >= 1");
    const auto ep = parse_endpoint(cfg_.base_url);
    origin_ = ep.origin;
    path_ = join_route(ep, "/v1/chat/completions");
}

namespace {

// Outcome of one HTTP exchange; `retry` marks transient failures.
struct Attempt {
    std::optional<std::string> text;
    bool retry = false;
    int status = 0;
    std::string error;
};

}  // namespace

GenerationRecord LlmClient::generate(const ChatRequest& req) const {
    req.validate();
    const auto body = req.body();
    GenerationRecord rec;
    rec.instance_id = req.instance_id;
    rec.prompt_hash = sha256_hex(body);
    rec.model = req.model;

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    const auto start = std::chrono::steady_clock::now();
    auto backoff = cfg_.initial_backoff;
    std::string last_error;
    for (std::uint32_t attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        Attempt a;
        httplib::Client client(origin_);
        client.set_connection_timeout(cfg_.timeout_seconds);
        client.set_read_timeout(cfg_.timeout_seconds);
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            a.retry = true;
            a.error = "connection failed: " + httplib::to_string(res.error());
        } else if (res->status == 429 || res->status >= 500) {
            a.retry = true;
            a.status = res->status;
            a.error = "HTTP " + std::to_string(res->status);
        } else if (res->status >= 400) {
            throw RequestError("chat completion rejected with HTTP " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               res->status);
        } else {
            try {
                const auto j = nlohmann::json::parse(res->body);
                const auto& choice = j.at("choices").at(0);
                const auto& content = choice.at("message").at("content");
                a.text = content.is_null() ? std::string() : content.get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                a.retry = true;
                a.error = std::string("malformed response body: ") + e.what();
            }
        }

        if (a.text) {
            if (a.text->find_first_not_of(" \t\r\n") == std::string::npos) {
                throw ContentError("empty completion for instance " + req.instance_id);
            }
            rec.output_text = std::move(*a.text);
            rec.attempt = attempt;
            rec.latency_ms = static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                    .count());
            return rec;
        }
        last_error = a.error;
        if (attempt < cfg_.max_attempts) {
            spdlog::warn("instance {}: attempt {} failed ({}), retrying in {} ms", req.instance_id, attempt, a.error,
                         backoff.count());
            std::this_thread::sleep_for(backoff);
            backoff = std::min(backoff * 2, cfg_.max_backoff);
        }
    }
    throw TransportError("gave up on instance " + req.instance_id + " after " + std::to_string(cfg_.max_attempts) +
                         " attempts: " + last_error);
}

std::vector<LlmClient::BatchItem> LlmClient::generate_batch(const std::vector<ChatRequest>& reqs,
                                                            std::size_t max_in_flight) const {
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    std::vector<BatchItem> out(reqs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < reqs.size(); i = next.fetch_add(1)) {
            try {
                out[i].record = generate(reqs[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    const auto threads = std::min(max_in_flight, reqs.size());
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    pool.clear();
    return out;
}

// ---------------------------------------------------------------------------
// Ledger

std::string record_to_json(const GenerationRecord& rec) {
    nlohmann::ordered_json j;
    j["instance_id"] = rec.instance_id;
    j["prompt_hash"] = rec.prompt_hash;
    j["model"] = rec.model;
    j["attempt"] = rec.attempt;
    j["latency_ms"] = rec.latency_ms;
    j["output_text"] = rec.output_text;
    return j.dump();
}

GenerationRecord record_from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        GenerationRecord r;
        r.instance_id = j.at("instance_id").get<std::string>();
        r.prompt_hash = j.at("prompt_hash").get<std::string>();
        r.model = j.value("model", std::string());
        r.attempt = j.value("attempt", 0u);
        r.latency_ms = j.value("latency_ms", std::uint64_t{0});
        r.output_text = j.at("output_text").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed generation record: ") + e.what());
    }
}

GenerationLedger::GenerationLedger(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (in && std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto r = record_from_json(line);
            keys_.emplace(r.instance_id, r.prompt_hash);
            records_.push_back(std::move(r));
        } catch (const InputError&) {
            // A torn final line from an interrupted run is dropped; it will be regenerated.
            spdlog::warn("{}:{}: skipping unreadable ledger line", file_.string(), line_no);
        }
    }
    if (line_no > 0) {
        std::ifstream tail(file_, std::ios::binary | std::ios::ate);
        tail.seekg(-1, std::ios::end);
        torn_tail_ = tail.get() != '\n';
    }
}

bool GenerationLedger::contains(const std::string& instance_id, const std::string& hash) const {
    std::lock_guard lock(mu_);
    return keys_.count({instance_id, hash}) > 0;
}

std::optional<GenerationRecord> GenerationLedger::find(const std::string& instance_id, const std::string& hash) const {
    std::lock_guard lock(mu_);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->instance_id == instance_id && it->prompt_hash == hash) return *it;
    }
    return std::nullopt;
}

void GenerationLedger::append(const GenerationRecord& rec) {
    std::lock_guard lock(mu_);
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) throw InputError("cannot append to " + file_.string());
    if (torn_tail_) {
        out << '\n';
        torn_tail_ = false;
    }
    out << record_to_json(rec) << '\n';
    out.flush();
    if (!out) throw InputError("write failed for " + file_.string());
    keys_.emplace(rec.instance_id, rec.prompt_hash);
    records_.push_back(rec);
}

std::size_t GenerationLedger::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

}  // namespace etr
