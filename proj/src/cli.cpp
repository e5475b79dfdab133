#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "etr/adapter.hpp"
#include "etr/classifier.hpp"
#include "etr/encoder.hpp"
#include "etr/error.hpp"
#include "etr/instances.hpp"
#include "etr/llm_client.hpp"
#include "etr/metrics.hpp"
#include "etr/pipeline.hpp"
#include "etr/prompt.hpp"
#include "etr/sampler.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace etr {

namespace {

struct Invocation {
    std::string config_file;
    std::map<std::string, std::string> flags;
    std::string instances;
    std::string embeddings;
    std::string predictions;
    std::string classifier;
    std::string resume;
    std::string task = "explain";
    std::string split = "test";
    std::string explain_split;  // empty: all for explain, test for infer
    bool no_chains = false;
    std::vector<std::string> reports;
    std::vector<std::string> names;
};

PipelineConfig resolve(const Invocation& inv) {
    PipelineConfig cfg;
    if (!inv.config_file.empty()) apply_overrides(cfg, read_config_file(inv.config_file));
    apply_overrides(cfg, inv.flags);
    return cfg;
}

fs::path out_dir(const PipelineConfig& cfg) { return fs::path(cfg.out); }

fs::path or_default(const std::string& given, const fs::path& fallback) {
    return given.empty() ? fallback : fs::path(given);
}

TemporalGraph load_graph(const PipelineConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("--dataset is required for this stage");
    return parse_dataset(cfg.dataset, {cfg.granularity, cfg.time_unit});
}

std::vector<fs::path> dataset_files(const PipelineConfig& cfg) {
    std::vector<fs::path> out;
    for (const char* name : {"entity2id.txt", "relation2id.txt", "train.txt", "valid.txt", "test.txt"}) {
        const auto p = fs::path(cfg.dataset) / name;
        if (fs::exists(p)) out.push_back(p);
    }
    return out;
}

TimeEpoch resolve_epoch(const PipelineConfig& cfg) {
    if (!cfg.epoch.empty()) return parse_epoch(cfg.epoch);
    std::string name = cfg.dataset_name;
    if (name.empty() && !cfg.dataset.empty()) name = fs::path(cfg.dataset).lexically_normal().filename().string();
    if (name.empty() && !cfg.dataset.empty()) name = fs::path(cfg.dataset).lexically_normal().parent_path().filename().string();
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    try {
        return profile_epoch(name);
    } catch (const ConfigError&) {
        const TimeEpoch fallback = cfg.granularity == Granularity::Year ? TimeEpoch{0, 1, 1} : TimeEpoch{1970, 1, 1};
        spdlog::info("no epoch profile for \"{}\"; rendering times from {}", name,
                     render_time(0, cfg.granularity, fallback));
        return fallback;
    }
}

SamplerOptions sampler_options(const PipelineConfig& cfg) {
    SamplerOptions o;
    o.chains.window = cfg.window;
    o.chains.max_chains = cfg.max_chains;
    o.chains.inverse_edges = cfg.inverse_edges;
    o.ordering = cfg.ordering;
    return o;
}

ClientConfig client_config(const PipelineConfig& cfg) {
    auto c = ClientConfig::from_env();
    if (!cfg.api_base.empty()) c.base_url = cfg.api_base;
    c.max_attempts = cfg.max_attempts;
    return c;
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out << text;
    if (!out) throw InputError("write failed for " + file.string());
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(const PipelineConfig& cfg) {
    const auto g = load_graph(cfg);
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    const auto snap = dir / "graph.tkg";
    write_snapshot(snap, g);
    ojson stats;
    stats["entities"] = g.entities().size();
    stats["relations"] = g.relations().size();
    stats["facts"] = g.facts().size();
    stats["input_facts"] = g.build_stats().input_facts;
    stats["duplicates"] = g.build_stats().duplicates;
    stats["timestamps"] = g.num_timestamps();
    stats["granularity"] = to_string(g.granularity());
    stats["train_max_time"] = g.default_train_max_time();
    const auto stats_file = dir / "graph_stats.json";
    write_text(stats_file, stats.dump(2) + "\n");
    write_manifest(dir, "ingest", cfg, dataset_files(cfg), {snap, stats_file});
    std::cout << stats.dump(2) << "\n";
}

void stage_sample(const PipelineConfig& cfg) {
    const auto g = load_graph(cfg);
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    std::vector<fs::path> inputs = dataset_files(cfg);
    std::vector<fs::path> outputs;

    NeutralRelationTable table(g.relations().size());
    const bool need_neutrals = cfg.train_counts.neutral + cfg.test_counts.neutral > 0;
    if (!cfg.neutral_table.empty()) {
        table = NeutralRelationTable::load(cfg.neutral_table, g.relations().size());
        inputs.emplace_back(cfg.neutral_table);
    } else if (!cfg.nli_stub.empty() || !cfg.nli_url.empty()) {
        std::unique_ptr<NliScorer> scorer;
        if (!cfg.nli_stub.empty()) {
            scorer = std::make_unique<StubNliScorer>(StubNliScorer::from_relation_file(cfg.nli_stub));
            inputs.emplace_back(cfg.nli_stub);
        } else {
            scorer = std::make_unique<HttpNliScorer>(cfg.nli_url);
        }
        table = build_neutral_table(g.relations(), *scorer, cfg.tau, cfg.max_in_flight);
        const auto tfile = dir / "neutral_table.tsv";
        table.save(tfile);
        outputs.push_back(tfile);
    } else if (need_neutrals) {
        throw ConfigError("neutral samples need --neutral-table, --nli-stub or --nli-url");
    }

    DatasetConfig dc;
    dc.sampler = sampler_options(cfg);
    dc.train = cfg.train_counts;
    dc.test = cfg.test_counts;
    dc.train_max_time = cfg.train_max_time;
    dc.seed = cfg.seed;
    const auto insts = build_dataset(g, table, dc);
    const RenderContext ctx{g, resolve_epoch(cfg)};
    const auto file = dir / "instances.jsonl";
    write_instances(file, insts, ctx);
    outputs.insert(outputs.begin(), file);
    write_manifest(dir, "sample", cfg, inputs, outputs);
    spdlog::info("wrote {} instances to {}", insts.size(), file.string());
}

ChatRequest make_request(const PipelineConfig& cfg, const LabeledQuery& inst, std::string content) {
    ChatRequest r;
    r.instance_id = std::to_string(inst.id);
    r.model = cfg.model;
    r.temperature = cfg.temperature;
    r.max_tokens = cfg.max_tokens;
    r.messages.push_back({"user", std::move(content)});
    return r;
}

// Generates every request missing from the ledger. Returns the number of failures.
std::size_t fill_ledger(const PipelineConfig& cfg, const std::vector<ChatRequest>& reqs, GenerationLedger& ledger) {
    std::vector<ChatRequest> pending;
    for (const auto& r : reqs) {
        if (!ledger.contains(r.instance_id, prompt_hash(r))) pending.push_back(r);
    }
    spdlog::info("{} of {} prompts already in the ledger; generating {}", reqs.size() - pending.size(), reqs.size(),
                 pending.size());
    if (pending.empty()) return 0;
    const LlmClient client(client_config(cfg));
    const auto results = client.generate_batch(pending, cfg.max_in_flight);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].ok()) {
            ledger.append(*results[i].record);
        } else {
            ++failed;
            spdlog::error("instance {}: {}", pending[i].instance_id, results[i].error);
        }
    }
    return failed;
}

std::vector<LabeledQuery> select_split(std::vector<LabeledQuery> insts, const std::string& split) {
    if (split == "all") return insts;
    if (split != "train" && split != "test") throw ConfigError("--split must be train, test or all");
    const auto kind = split == "train" ? SplitKind::Train : SplitKind::Test;
    std::erase_if(insts, [&](const LabeledQuery& q) { return q.split.kind != kind; });
    return insts;
}

void stage_explain(const PipelineConfig& cfg, const Invocation& inv) {
    const auto g = load_graph(cfg);
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    const auto inst_file = or_default(inv.instances, dir / "instances.jsonl");
    const bool infer = inv.task == "infer";
    if (!infer && inv.task != "explain") throw ConfigError("--task must be explain or infer");
    const auto split = inv.explain_split.empty() ? std::string(infer ? "test" : "all") : inv.explain_split;
    auto insts = select_split(read_instances(inst_file), split);
    const RenderContext ctx{g, resolve_epoch(cfg)};
    for (const auto& inst : insts) check_instance_ids(inst, g.entities().size(), g.relations().size());

    std::vector<ChatRequest> reqs;
    for (const auto& inst : insts) {
        if (infer) {
            const auto ri = render_instruct(inst, ctx, !inv.no_chains);
            reqs.push_back(make_request(cfg, inst, ri.input.empty() ? ri.instruction : ri.instruction + "\n\n" + ri.input));
        } else {
            reqs.push_back(make_request(cfg, inst, render_explanation_prompt(inst, ctx)));
        }
    }
    const auto ledger_file = dir / (infer ? "generations-infer.jsonl" : "generations.jsonl");
    GenerationLedger ledger(ledger_file);
    const auto failed = fill_ledger(cfg, reqs, ledger);
    if (failed) {
        throw TransportError(std::to_string(failed) + " generations failed; completed ones are kept in " +
                             ledger_file.string() + " and a rerun resumes from there");
    }

    std::vector<fs::path> outputs;
    if (infer) {
        const auto pred_file = dir / (inv.no_chains ? "predictions-nochains.jsonl" : "predictions.jsonl");
        std::ofstream out(pred_file, std::ios::binary | std::ios::trunc);
        for (std::size_t i = 0; i < insts.size(); ++i) {
            const auto rec = ledger.find(reqs[i].instance_id, prompt_hash(reqs[i]));
            ojson j;
            j["id"] = insts[i].id;
            j["output_text"] = rec->output_text;
            out << j.dump() << '\n';
        }
        outputs.push_back(pred_file);
    } else {
        const auto explained = dir / "instances.explained.jsonl";
        const auto instruct = dir / "instruct.jsonl";
        std::ofstream tuning(instruct, std::ios::binary | std::ios::trunc);
        for (std::size_t i = 0; i < insts.size(); ++i) {
            insts[i].explanation = ledger.find(reqs[i].instance_id, prompt_hash(reqs[i]))->output_text;
            const auto ri = render_instruct(insts[i], ctx, true);
            ojson j;
            j["id"] = insts[i].id;
            j["split"] = to_string(insts[i].split.kind);
            j["label"] = to_string(ri.label);
            j["instruction"] = ri.instruction;
            j["input"] = ri.input;
            j["output"] = ri.target;
            tuning << j.dump() << '\n';
        }
        tuning.close();
        write_instances(explained, insts, ctx);
        outputs = {explained, instruct};
    }
    outputs.push_back(ledger_file);
    auto inputs = dataset_files(cfg);
    inputs.push_back(inst_file);
    write_manifest(dir, infer ? "explain-infer" : "explain", cfg, inputs, outputs);
}

void stage_export_tokens(const PipelineConfig& cfg, const Invocation& inv) {
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    const auto inst_file = or_default(inv.instances, dir / "instances.jsonl");
    const auto emb_file = or_default(inv.embeddings, dir / "embeddings.etre");
    const auto insts = read_instances(inst_file);
    const auto tab = load_embeddings(emb_file);
    const auto tokens = dir / "tokens.etrt";
    const auto n = export_tokens(insts, tab, tokens);
    write_manifest(dir, "export-tokens", cfg, {inst_file, emb_file}, {tokens});
    spdlog::info("wrote {} graph vectors of dimension {} to {}", n, 3 * tab.dim(), tokens.string());
}

void stage_train_encoder(const PipelineConfig& cfg, const Invocation& inv) {
    const auto g = load_graph(cfg);
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    EncoderConfig ec;
    ec.d_s = cfg.d_s;
    ec.hidden = cfg.hidden;
    ec.epochs = cfg.encoder_epochs;
    ec.learning_rate = cfg.encoder_lr;
    ec.lr_decay = cfg.encoder_lr_decay;
    ec.seed = cfg.seed;
    ec.history_horizon = cfg.history_horizon;
    ec.train_max_time = cfg.train_max_time;
    std::optional<EmbeddingTable> resume;
    auto inputs = dataset_files(cfg);
    if (!inv.resume.empty()) {
        resume = load_embeddings(inv.resume);
        inputs.emplace_back(inv.resume);
    }
    const auto res = train_encoder(g, ec, resume ? &*resume : nullptr);
    const auto emb = dir / "embeddings.etre";
    save_embeddings(res.table, emb);
    ojson log;
    log["epoch_loss"] = res.epoch_loss;
    log["holdout_loss"] = res.holdout_loss;
    log["holdout_accuracy"] = res.holdout_accuracy;
    log["train_examples"] = res.train_examples;
    log["holdout_examples"] = res.holdout_examples;
    const auto log_file = dir / "encoder_log.json";
    write_text(log_file, log.dump(2) + "\n");
    write_manifest(dir, "train-encoder", cfg, inputs, {emb, log_file});
}

void stage_train_classifier(const PipelineConfig& cfg, const Invocation& inv) {
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    const auto inst_file = or_default(inv.instances, dir / "instances.jsonl");
    const auto emb_file = or_default(inv.embeddings, dir / "embeddings.etre");
    const auto train = select_split(read_instances(inst_file), "train");
    if (train.empty()) throw InputError("no train instances in " + inst_file.string());
    const auto tab = load_embeddings(emb_file);
    ClassifierConfig cc;
    cc.epochs = cfg.classifier_epochs;
    cc.learning_rate = cfg.classifier_lr;
    cc.batch_size = cfg.batch_size;
    cc.seed = cfg.seed;
    const auto res = train_classifier(train, tab, cc);
    const auto ckpt = dir / "classifier.etrc";
    save_classifier(res.model, ckpt);
    ojson log;
    log["epoch_loss"] = res.epoch_loss;
    const auto log_file = dir / "classifier_log.json";
    write_text(log_file, log.dump(2) + "\n");
    write_manifest(dir, "train-classifier", cfg, {inst_file, emb_file}, {ckpt, log_file});
}

ojson report_json(const MetricReport& r) {
    ojson j;
    ojson classes = ojson::array();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& m = r.per_class[c];
        classes.push_back({{"label", display_name(kAllLabels[c])},
                           {"precision", m.precision},
                           {"recall", m.recall},
                           {"f1", m.f1},
                           {"support", m.support}});
    }
    j["per_class"] = classes;
    j["overall_precision"] = r.overall_precision;
    j["overall_recall"] = r.overall_recall;
    j["overall_f1"] = r.overall_f1;
    j["total"] = r.total;
    j["invalid"] = r.invalid;
    j["confusion"] = r.confusion;
    auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
    j["bleu4"] = opt(r.bleu4);
    j["rouge_l"] = opt(r.rouge_l);
    j["meteor"] = opt(r.meteor);
    j["bertscore_f1"] = opt(r.bertscore_f1);
    j["bertscore_unavailable"] = r.bertscore_unavailable;
    return j;
}

std::map<std::uint64_t, std::string> read_predictions(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::map<std::uint64_t, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("id").get<std::uint64_t>();
            if (!out.emplace(id, j.at("output_text").get<std::string>()).second) {
                throw ParseError(file.string(), line_no, "duplicate prediction id " + std::to_string(id));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(file.string(), line_no, std::string("malformed prediction: ") + e.what());
        }
    }
    return out;
}

void stage_evaluate(const PipelineConfig& cfg, const Invocation& inv) {
    const auto dir = out_dir(cfg);
    const auto inst_file = or_default(inv.instances, dir / "instances.jsonl");
    const auto gold = select_split(read_instances(inst_file), inv.split);
    if (gold.empty()) throw InputError("no gold instances for split " + inv.split);
    std::vector<fs::path> inputs{inst_file};

    MetricReport report;
    if (!inv.classifier.empty()) {
        const auto emb_file = or_default(inv.embeddings, dir / "embeddings.etre");
        const auto c = load_classifier(inv.classifier);
        const auto tab = load_embeddings(emb_file);
        report = evaluate_classifier(c, tab, gold);
        inputs.emplace_back(inv.classifier);
        inputs.push_back(emb_file);
    } else {
        if (inv.predictions.empty()) throw ConfigError("evaluate needs --predictions or --classifier");
        const auto preds = read_predictions(inv.predictions);
        inputs.emplace_back(inv.predictions);
        if (preds.size() != gold.size()) {
            throw InputError("prediction count " + std::to_string(preds.size()) + " does not match gold count " +
                             std::to_string(gold.size()));
        }
        std::vector<std::optional<Label>> labels;
        std::vector<Label> gold_labels;
        std::vector<ScoredPair> pairs;
        for (const auto& g : gold) {
            auto it = preds.find(g.id);
            if (it == preds.end()) throw InputError("no prediction for instance " + std::to_string(g.id));
            const auto parsed = parse_prediction(it->second);
            labels.push_back(parsed.label);
            gold_labels.push_back(g.label);
            if (g.explanation) pairs.push_back({parsed.explanation_text, *g.explanation});
        }
        report = classification_report(labels, gold_labels);
        std::unique_ptr<Embedder> embedder;
        if (!cfg.embed_model.empty()) {
            const auto cc = client_config(cfg);
            embedder = std::make_unique<HttpEmbedder>(cc.base_url, cfg.embed_model, cc.api_key);
        }
        add_text_metrics(report, pairs, embedder.get(), cfg.max_in_flight);
    }

    OutputLock lock(dir);
    const auto json_file = dir / "report.json";
    const auto md_file = dir / "report.md";
    write_text(json_file, report_json(report).dump(2) + "\n");
    const auto md = format_markdown(report);
    write_text(md_file, md);
    write_manifest(dir, "evaluate", cfg, inputs, {json_file, md_file});
    std::cout << md;
}

void stage_report(const PipelineConfig& cfg, const Invocation& inv) {
    if (inv.reports.empty()) throw ConfigError("report needs at least one --reports file");
    if (!inv.names.empty() && inv.names.size() != inv.reports.size()) {
        throw ConfigError("--names must match --reports one to one");
    }
    std::string md = "| Run | Yes F1 | No F1 | Unsure F1 | Overall | BLEU-4 | ROUGE-L | METEOR | BertScore |\n"
                     "|-----|-------:|------:|----------:|--------:|-------:|--------:|-------:|----------:|\n";
    std::vector<fs::path> inputs;
    for (std::size_t i = 0; i < inv.reports.size(); ++i) {
        std::ifstream in(inv.reports[i]);
        if (!in) throw InputError("cannot open " + inv.reports[i]);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(inv.reports[i] + ": " + e.what());
        }
        auto cell = [](const nlohmann::json& v) {
            return v.is_null() ? std::string("n/a") : fmt::format("{:.2f}", v.get<double>());
        };
        const auto& pc = j.at("per_class");
        const auto name = inv.names.empty() ? fs::path(inv.reports[i]).parent_path().filename().string() : inv.names[i];
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", name, cell(pc.at(0).at("f1")),
                          cell(pc.at(1).at("f1")), cell(pc.at(2).at("f1")), cell(j.at("overall_f1")),
                          cell(j.value("bleu4", nlohmann::json())), cell(j.value("rouge_l", nlohmann::json())),
                          cell(j.value("meteor", nlohmann::json())), cell(j.value("bertscore_f1", nlohmann::json())));
        inputs.emplace_back(inv.reports[i]);
    }
    const auto dir = out_dir(cfg);
    OutputLock lock(dir);
    const auto file = dir / "summary.md";
    write_text(file, md);
    write_manifest(dir, "report", cfg, inputs, {file});
    std::cout << md;
}

void add_common(CLI::App* sub, Invocation& inv) {
    sub->add_option("--config", inv.config_file, "YAML key-value config file");
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(
            name, [&inv, key](const std::string& v) { inv.flags[key] = v; }, help);
    };
    flag("--dataset", "dataset", "dataset directory");
    flag("--dataset-name", "dataset_name", "epoch profile name (icews14, icews18, icews05-15, gdelt, wiki)");
    flag("--granularity", "granularity", "day, 15min or year");
    flag("--time-unit", "time_unit", "raw timestamp units per ordinal");
    flag("--epoch", "epoch", "calendar instant of ordinal 0");
    flag("--train-max-time", "train_max_time", "last train timestamp");
    flag("--window", "window", "history window w");
    flag("--max-chains", "max_chains", "chain cap per query");
    flag("--inverse-edges", "inverse_edges", "also walk edges backwards (true/false)");
    flag("--ordering", "ordering", "paths, descending, ascending or random");
    flag("--tau", "tau", "NLI neutral threshold");
    flag("--counts", "counts", "train counts pos,neg,neu");
    flag("--test-counts", "test_counts", "test counts pos,neg,neu");
    flag("--seed", "seed", "master seed");
    flag("--nli-url", "nli_url", "NLI scorer URL");
    flag("--nli-stub", "nli_stub", "NLI stub table (relation labels and probabilities)");
    flag("--neutral-table", "neutral_table", "precomputed neutral relation table");
    flag("--ds", "ds", "structural embedding dimension");
    flag("--hidden", "hidden", "encoder hidden units");
    flag("--encoder-epochs", "encoder_epochs", "encoder epochs");
    flag("--encoder-lr", "encoder_lr", "encoder learning rate");
    flag("--encoder-lr-decay", "encoder_lr_decay", "inverse-time decay of the encoder step size");
    flag("--history-horizon", "history_horizon", "frequency feature horizon");
    flag("--classifier-epochs", "classifier_epochs", "classifier epochs");
    flag("--classifier-lr", "classifier_lr", "classifier learning rate");
    flag("--batch-size", "batch_size", "classifier minibatch size");
    flag("--api-base", "api_base", "chat/embedding service base URL");
    flag("--model", "model", "model name sent to the service");
    flag("--temperature", "temperature", "sampling temperature");
    flag("--max-tokens", "max_tokens", "completion token cap");
    flag("--max-in-flight", "max_in_flight", "concurrent requests");
    flag("--max-attempts", "max_attempts", "attempts per request");
    flag("--embed-model", "embed_model", "embedding model for BertScore");
    flag("--out", "out", "output directory");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Explainable temporal reasoning toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    Invocation inv;

    auto* ingest = app.add_subcommand("ingest", "parse and index a dataset");
    auto* sample = app.add_subcommand("sample", "build positive/negative/neutral instances");
    auto* explain = app.add_subcommand("explain", "synthesize explanations or zero-shot predictions");
    auto* tokens = app.add_subcommand("export-tokens", "write pooled graph vectors");
    auto* encoder = app.add_subcommand("train-encoder", "train structural embeddings");
    auto* classifier = app.add_subcommand("train-classifier", "train the graph baseline classifier");
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold instances");
    auto* report = app.add_subcommand("report", "tabulate evaluation reports");
    for (auto* s : {ingest, sample, explain, tokens, encoder, classifier, evaluate, report}) add_common(s, inv);

    for (auto* s : {explain, tokens, classifier, evaluate}) s->add_option("--instances", inv.instances, "instance JSONL");
    for (auto* s : {tokens, classifier, evaluate}) s->add_option("--embeddings", inv.embeddings, "embedding file");
    explain->add_option("--task", inv.task, "explain or infer");
    explain->add_flag("--no-chains", inv.no_chains, "omit chains text from inference prompts");
    explain->add_option("--split", inv.explain_split, "train, test or all (default: all for explain, test for infer)");
    encoder->add_option("--resume", inv.resume, "starting embeddings");
    evaluate->add_option("--predictions", inv.predictions, "predictions JSONL {id, output_text}");
    evaluate->add_option("--classifier", inv.classifier, "classifier checkpoint");
    evaluate->add_option("--split", inv.split, "train, test or all");
    report->add_option("--reports", inv.reports, "report.json files")->expected(1, -1);
    report->add_option("--names", inv.names, "row names")->expected(1, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto* chosen = app.get_subcommands().front();
    const std::string stage = chosen->get_name();
    try {
        const auto cfg = resolve(inv);
        if (stage == "ingest") stage_ingest(cfg);
        if (stage == "sample") stage_sample(cfg);
        if (stage == "explain") stage_explain(cfg, inv);
        if (stage == "export-tokens") stage_export_tokens(cfg, inv);
        if (stage == "train-encoder") stage_train_encoder(cfg, inv);
        if (stage == "train-classifier") stage_train_classifier(cfg, inv);
        if (stage == "evaluate") stage_evaluate(cfg, inv);
        if (stage == "report") stage_report(cfg, inv);
    } catch (const ConfigError& e) {
        std::cerr << "etr " << stage << ": configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "etr " << stage << ": failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace etr
