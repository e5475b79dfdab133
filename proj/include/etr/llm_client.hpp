#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace etr {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string instance_id;
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    std::uint32_t max_tokens = 512;

    /// Throws ConfigError without a user message or with temperature outside [0, 2].
    void validate() const;
    /// Exact JSON body sent to the service (keys sorted, compact).
    std::string body() const;
};

struct GenerationRecord {
    std::string instance_id;
    std::string prompt_hash;  // SHA-256 of body()
    std::string output_text;
    std::string model;
    std::uint64_t latency_ms = 0;
    std::uint32_t attempt = 0;
};

std::string prompt_hash(const ChatRequest& req);

struct ClientConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string api_key;
    std::uint32_t max_attempts = 5;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{8000};
    int timeout_seconds = 120;

    /// base_url from ETR_API_BASE and api_key from ETR_API_KEY when set.
    static ClientConfig from_env();
};

/// OpenAI-compatible chat completions client.
class LlmClient {
  public:
    explicit LlmClient(ClientConfig cfg);

    /// Retries 429, 5xx, connection failures and malformed bodies with
    /// exponential backoff. Other 4xx raise RequestError, an exhausted budget
    /// raises TransportError, and an empty completion raises ContentError.
    GenerationRecord generate(const ChatRequest& req) const;

    struct BatchItem {
        std::optional<GenerationRecord> record;
        std::string error;

        bool ok() const noexcept { return record.has_value(); }
    };

    /// Output order matches input order; at most max_in_flight requests are
    /// outstanding; failures are reported per item.
    std::vector<BatchItem> generate_batch(const std::vector<ChatRequest>& reqs, std::size_t max_in_flight) const;

    const ClientConfig& config() const noexcept { return cfg_; }

  private:
    ClientConfig cfg_;
    std::string origin_;
    std::string path_;
};

/// Append-only JSONL store of GenerationRecords keyed by (instance id, prompt hash).
class GenerationLedger {
  public:
    explicit GenerationLedger(std::filesystem::path file);

    bool contains(const std::string& instance_id, const std::string& hash) const;
    std::optional<GenerationRecord> find(const std::string& instance_id, const std::string& hash) const;
    void append(const GenerationRecord& rec);
    std::size_t size() const;

  private:
    std::filesystem::path file_;
    mutable std::mutex mu_;
    std::vector<GenerationRecord> records_;
    std::set<std::pair<std::string, std::string>> keys_;
    bool torn_tail_ = false;
};

std::string record_to_json(const GenerationRecord& rec);
GenerationRecord record_from_json(const std::string& line);

}  // namespace etr
