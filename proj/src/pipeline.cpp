#include "etr/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "etr/digest.hpp"
#include "etr/error.hpp"

namespace etr {

namespace {

template <typename T>
T parse_unsigned(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("\"" + key + "\" expects a non-negative integer, got \"" + v + "\"");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError("\"" + key + "\" expects a number, got \"" + v + "\"");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("\"" + key + "\" expects true or false, got \"" + v + "\"");
}

std::string normalize_key(std::string k) {
    for (auto& c : k) {
        if (c == '-') c = '_';
    }
    return k;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
        {"dataset_name", [](auto& c, auto&, auto& v) { c.dataset_name = v; }},
        {"granularity", [](auto& c, auto&, auto& v) { c.granularity = parse_granularity(v); }},
        {"time_unit",
         [](auto& c, auto& k, auto& v) {
             c.time_unit = parse_unsigned<std::uint32_t>(k, v);
             if (c.time_unit == 0) throw ConfigError("time_unit must be >= 1");
         }},
        {"epoch", [](auto& c, auto&, auto& v) { c.epoch = v; }},
        {"train_max_time",
         [](auto& c, auto& k, auto& v) { c.train_max_time = parse_unsigned<TimestampId>(k, v); }},
        {"window",
         [](auto& c, auto& k, auto& v) {
             c.window = parse_unsigned<std::uint32_t>(k, v);
             if (c.window == 0) throw ConfigError("window must be >= 1");
         }},
        {"max_chains",
         [](auto& c, auto& k, auto& v) {
             c.max_chains = parse_unsigned<std::size_t>(k, v);
             if (c.max_chains == 0) throw ConfigError("max_chains must be >= 1");
         }},
        {"inverse_edges", [](auto& c, auto& k, auto& v) { c.inverse_edges = parse_bool(k, v); }},
        {"ordering", [](auto& c, auto&, auto& v) { c.ordering = parse_ordering(v); }},
        {"tau",
         [](auto& c, auto& k, auto& v) {
             c.tau = parse_real(k, v);
             if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
         }},
        {"counts", [](auto& c, auto&, auto& v) { c.train_counts = parse_counts(v); }},
        {"test_counts", [](auto& c, auto&, auto& v) { c.test_counts = parse_counts(v); }},
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_unsigned<std::uint64_t>(k, v); }},
        {"nli_url", [](auto& c, auto&, auto& v) { c.nli_url = v; }},
        {"nli_stub", [](auto& c, auto&, auto& v) { c.nli_stub = v; }},
        {"neutral_table", [](auto& c, auto&, auto& v) { c.neutral_table = v; }},
        {"ds",
         [](auto& c, auto& k, auto& v) {
             c.d_s = parse_unsigned<std::uint32_t>(k, v);
             if (c.d_s == 0) throw ConfigError("ds must be >= 1");
         }},
        {"hidden", [](auto& c, auto& k, auto& v) { c.hidden = parse_unsigned<std::uint32_t>(k, v); }},
        {"encoder_epochs", [](auto& c, auto& k, auto& v) { c.encoder_epochs = parse_unsigned<std::uint32_t>(k, v); }},
        {"encoder_lr", [](auto& c, auto& k, auto& v) { c.encoder_lr = parse_real(k, v); }},
        {"encoder_lr_decay", [](auto& c, auto& k, auto& v) { c.encoder_lr_decay = parse_real(k, v); }},
        {"history_horizon",
         [](auto& c, auto& k, auto& v) { c.history_horizon = parse_unsigned<std::uint32_t>(k, v); }},
        {"classifier_epochs",
         [](auto& c, auto& k, auto& v) { c.classifier_epochs = parse_unsigned<std::uint32_t>(k, v); }},
        {"classifier_lr", [](auto& c, auto& k, auto& v) { c.classifier_lr = parse_real(k, v); }},
        {"batch_size",
         [](auto& c, auto& k, auto& v) {
             c.batch_size = parse_unsigned<std::size_t>(k, v);
             if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
         }},
        {"api_base", [](auto& c, auto&, auto& v) { c.api_base = v; }},
        {"model", [](auto& c, auto&, auto& v) { c.model = v; }},
        {"temperature",
         [](auto& c, auto& k, auto& v) {
             c.temperature = parse_real(k, v);
             if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
         }},
        {"max_tokens", [](auto& c, auto& k, auto& v) { c.max_tokens = parse_unsigned<std::uint32_t>(k, v); }},
        {"max_in_flight",
         [](auto& c, auto& k, auto& v) {
             c.max_in_flight = parse_unsigned<std::size_t>(k, v);
             if (c.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
         }},
        {"max_attempts",
         [](auto& c, auto& k, auto& v) {
             c.max_attempts = parse_unsigned<std::uint32_t>(k, v);
             if (c.max_attempts == 0) throw ConfigError("max_attempts must be >= 1");
         }},
        {"embed_model", [](auto& c, auto&, auto& v) { c.embed_model = v; }},
        {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
    };
    return table;
}

}  // namespace

ClassCounts parse_counts(const std::string& text) {
    std::vector<std::size_t> parts;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        while (!piece.empty() && piece.front() == ' ') piece.erase(piece.begin());
        while (!piece.empty() && piece.back() == ' ') piece.pop_back();
        parts.push_back(parse_unsigned<std::size_t>("counts", piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 3) throw ConfigError("counts must be three numbers pos,neg,neu; got \"" + text + "\"");
    return {parts[0], parts[1], parts[2]};
}

void apply_overrides(PipelineConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [raw_key, value] : kv) {
        const auto key = normalize_key(raw_key);
        auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("unknown configuration key \"" + raw_key + "\"");
        it->second(cfg, key, value);
    }
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& file) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(file.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot read config " + file.string() + ": " + e.what());
    }
    std::map<std::string, std::string> out;
    if (root.IsNull()) return out;
    if (!root.IsMap()) throw ConfigError(file.string() + ": top level must be a key-value map");
    for (const auto& item : root) {
        const auto key = item.first.as<std::string>();
        const auto& v = item.second;
        if (v.IsScalar()) {
            out[key] = v.as<std::string>();
        } else if (v.IsSequence()) {
            std::string joined;
            for (const auto& e : v) {
                if (!e.IsScalar()) throw ConfigError(file.string() + ": \"" + key + "\" must be a flat list");
                if (!joined.empty()) joined += ',';
                joined += e.as<std::string>();
            }
            out[key] = joined;
        } else {
            throw ConfigError(file.string() + ": \"" + key + "\" must be a scalar or a list");
        }
    }
    return out;
}

std::string config_json(const PipelineConfig& c) {
    auto counts = [](const ClassCounts& k) { return nlohmann::json::array({k.positive, k.negative, k.neutral}); };
    nlohmann::json j{
        {"dataset", c.dataset},
        {"dataset_name", c.dataset_name},
        {"granularity", to_string(c.granularity)},
        {"time_unit", c.time_unit},
        {"epoch", c.epoch},
        {"train_max_time", c.train_max_time ? nlohmann::json(*c.train_max_time) : nlohmann::json(nullptr)},
        {"window", c.window},
        {"max_chains", c.max_chains},
        {"inverse_edges", c.inverse_edges},
        {"ordering", to_string(c.ordering)},
        {"tau", c.tau},
        {"counts", counts(c.train_counts)},
        {"test_counts", counts(c.test_counts)},
        {"seed", c.seed},
        {"nli_url", c.nli_url},
        {"nli_stub", c.nli_stub},
        {"neutral_table", c.neutral_table},
        {"ds", c.d_s},
        {"hidden", c.hidden},
        {"encoder_epochs", c.encoder_epochs},
        {"encoder_lr", c.encoder_lr},
        {"encoder_lr_decay", c.encoder_lr_decay},
        {"history_horizon", c.history_horizon},
        {"classifier_epochs", c.classifier_epochs},
        {"classifier_lr", c.classifier_lr},
        {"batch_size", c.batch_size},
        {"api_base", c.api_base},
        {"model", c.model},
        {"temperature", c.temperature},
        {"max_tokens", c.max_tokens},
        {"max_in_flight", c.max_in_flight},
        {"max_attempts", c.max_attempts},
        {"embed_model", c.embed_model},
        {"out", c.out},
    };
    return j.dump();
}

OutputLock::OutputLock(const std::filesystem::path& dir) : file_(dir / ".etr.lock") {
    std::filesystem::create_directories(dir);
    const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw InputError("output directory " + dir.string() + " is locked by another run (" + file_.string() +
                             "); remove the lock file if no run is active");
        }
        throw InputError("cannot create lock " + file_.string() + ": " + std::strerror(errno));
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(file_, ec);
}

void write_manifest(const std::filesystem::path& dir, const std::string& stage, const PipelineConfig& cfg,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs) {
    nlohmann::ordered_json j;
    j["tool"] = "etr";
    j["version"] = kToolVersion;
    j["stage"] = stage;
    const auto cj = config_json(cfg);
    j["config_hash"] = sha256_hex(cj);
    j["config"] = nlohmann::json::parse(cj);
    auto digests = [](const std::vector<std::filesystem::path>& files) {
        nlohmann::ordered_json d = nlohmann::ordered_json::array();
        for (const auto& f : files) d.push_back({{"path", f.generic_string()}, {"sha256", sha256_file(f)}});
        return d;
    };
    j["inputs"] = digests(inputs);
    j["outputs"] = digests(outputs);
    std::ofstream out(dir / ("manifest-" + stage + ".json"), std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

}  // namespace etr
