#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etr/chains.hpp"
#include "etr/sampler.hpp"
#include "etr/tkg.hpp"

namespace etr {

inline constexpr const char* kToolVersion = "0.3.0";

/// Every tunable of the pipeline. Keys accepted by apply_overrides are the
/// YAML keys listed in the README.
struct PipelineConfig {
    std::string dataset;
    std::string dataset_name;  // epoch profile; defaults to the dataset directory name
    Granularity granularity = Granularity::Day;
    std::uint32_t time_unit = 1;
    std::string epoch;  // explicit epoch overrides the profile
    std::optional<TimestampId> train_max_time;

    std::uint32_t window = 30;
    std::size_t max_chains = 60;
    bool inverse_edges = false;
    ChainOrdering ordering = ChainOrdering::Descending;
    double tau = 0.7;
    ClassCounts train_counts;
    ClassCounts test_counts;
    std::uint64_t seed = 0;

    std::string nli_url;
    std::string nli_stub;
    std::string neutral_table;

    std::uint32_t d_s = 512;
    std::uint32_t hidden = 64;
    std::uint32_t encoder_epochs = 10;
    double encoder_lr = 0.05;
    double encoder_lr_decay = 0.5;
    std::uint32_t history_horizon = 30;

    std::uint32_t classifier_epochs = 200;
    double classifier_lr = 0.1;
    std::size_t batch_size = 64;

    std::string api_base;
    std::string model = "gpt-4o";
    double temperature = 0.7;
    std::uint32_t max_tokens = 512;
    std::size_t max_in_flight = 4;
    std::uint32_t max_attempts = 5;

    std::string embed_model;
    std::string out = "out";
};

/// Applies "key" -> "value" pairs; unknown keys or unparsable values raise ConfigError.
void apply_overrides(PipelineConfig& cfg, const std::map<std::string, std::string>& kv);

/// Flat key-value YAML document -> overrides. Throws ConfigError.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& file);

/// "pos,neg,neu" -> counts.
ClassCounts parse_counts(const std::string& text);

/// Canonical JSON of the resolved configuration (sorted keys).
std::string config_json(const PipelineConfig& cfg);

/// Prevents two writers in one output directory. Created with O_EXCL,
/// removed on destruction.
class OutputLock {
  public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

  private:
    std::filesystem::path file_;
};

/// Writes manifest-<stage>.json into `dir`: tool version, stage, resolved
/// config and its hash, and SHA-256 digests of inputs and outputs.
void write_manifest(const std::filesystem::path& dir, const std::string& stage, const PipelineConfig& cfg,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

/// Entry point for the `etr` command line. Returns the process exit status:
/// 0 success, 1 stage failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace etr
