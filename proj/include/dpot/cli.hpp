#pragma once

// Command-line front end: run, score, report, gen-synthetic, validate.

#include <iostream>
#include <random>
#include <set>

#include "CLI11.hpp"
#include "dpot/http_backend.hpp"
#include "dpot/reporting.hpp"
#include "dpot/scripts.hpp"
#include "dpot/synthetic.hpp"

namespace dpot::cli {

struct RunArgs {
    std::string dataset;
    std::vector<std::string> subsets;
    std::size_t sample_per_subset = 0;
    std::uint64_t seed = 0;
    std::string strategy = "dpot";
    std::string history_len = "4";
    int max_turns = 0;
    bool reference = false;
    std::size_t reference_k = 2;
    std::string reference_source = "gold";
    std::string reference_traces;
    std::string reference_pool = "same-subset";
    std::string backend = "http";
    std::string scripts;
    std::string base_url = "https://api.openai.com/v1";
    bool multimodal = false;
    std::string model = "gpt-4-vision-preview";
    int max_tokens = 300;
    double temperature = 0.0;
    std::string grounding = "model";
    double rpm = 0.0;
    int max_retries = 3;
    std::int64_t prompt_budget = 0;
    std::string plan_file;
    std::string out;
    std::size_t parallel = 1;
    bool store_prompts = false;
};

struct ScoreArgs {
    std::string traces;
    std::string dataset;
    std::string out;
    std::string format = "json";
    bool weighted = false;
    bool strict_text = false;
    double click_threshold = 0.14;
};

struct ReportArgs {
    std::string scores;
    std::string format = "text";
    std::string out;
};

struct GenArgs {
    std::uint64_t seed = 0;
    int episodes = 50;
    std::string out;
    std::string oracle_scripts;
    std::string wrong_scripts;
    std::string strategy = "dpot";
    std::string history_len = "4";
    std::string grounding = "model";
    SyntheticParams params;
};

inline std::optional<int> parse_history_len(const std::string& s) {
    const std::string t = util::to_lower(util::trim(s));
    if (t == "inf" || t == "unbounded") return std::nullopt;
    try {
        std::size_t used = 0;
        const int n = std::stoi(t, &used);
        if (used == t.size() && n >= 0) return n;
    } catch (const std::exception&) {
    }
    throw Error("--history-len must be a non-negative integer or \"inf\", got \"" + s + "\"");
}

inline Strategy resolve_strategy(const std::string& name, const std::string& history_len, bool history_given,
                                 bool reference) {
    Strategy st = Strategy::parse(name, parse_history_len(history_len));
    if (history_given && st.kind != Strategy::Kind::ReAct) throw Error("--history-len only applies to --strategy react");
    if (reference) {
        if (st.kind != Strategy::Kind::DPoT && st.kind != Strategy::Kind::DPoTWithReference)
            throw Error("--reference requires --strategy dpot or dpot-ref, not " + st.name());
        st.kind = Strategy::Kind::DPoTWithReference;
    }
    return st;
}

inline Grounding parse_grounding(const std::string& s) {
    return s == "grammar" ? Grounding::DescriptionGrammar : Grounding::ModelCall;
}

/// Keeps up to `n` episodes per subset, chosen by a seeded shuffle, in dataset order.
inline std::vector<Episode> sample_per_subset(const std::vector<Episode>& episodes, std::size_t n, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_subset;
    for (std::size_t i = 0; i < episodes.size(); ++i) by_subset[episodes[i].subset].push_back(i);
    std::set<std::size_t> keep;
    std::mt19937_64 rng(seed);
    for (auto& [name, idx] : by_subset) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < std::min(n, idx.size()); ++k) keep.insert(idx[k]);
    }
    std::vector<Episode> out;
    for (std::size_t i : keep) out.push_back(episodes[i]);
    return out;
}

inline int do_run(const RunArgs& a, bool history_given, std::ostream& out, std::ostream& err) {
    std::optional<std::set<std::string>> filter;
    if (!a.subsets.empty()) filter = std::set<std::string>(a.subsets.begin(), a.subsets.end());
    Dataset ds = load_dataset(a.dataset, filter);
    std::vector<Episode> episodes = a.sample_per_subset ? sample_per_subset(ds.episodes, a.sample_per_subset, a.seed)
                                                        : ds.episodes;
    if (episodes.empty()) throw Error("no episodes selected from " + a.dataset);

    RunConfig cfg;
    cfg.strategy = resolve_strategy(a.strategy, a.history_len, history_given, a.reference);
    if (a.max_turns < 0) throw Error("--max-turns must be >= 0");
    if (a.max_turns > 0) cfg.max_turns = a.max_turns;
    cfg.decoding = {a.model, a.max_tokens, a.temperature};
    cfg.grounding = parse_grounding(a.grounding);
    if (a.prompt_budget > 0) cfg.prompt.max_prompt_tokens = a.prompt_budget;
    cfg.store_prompts = a.store_prompts;
    cfg.reference_k = a.reference_k;
    cfg.reference_source = a.reference_source == "predicted" ? ReferenceSource::Predicted : ReferenceSource::Gold;
    cfg.reference_pool = a.reference_pool == "all" ? RetrievalPool::AllSubsets : RetrievalPool::SameSubset;
    if (!a.plan_file.empty()) cfg.external_plans = std::make_shared<ExternalPlans>(load_plan_file(a.plan_file));
    if (cfg.reference_source == ReferenceSource::Predicted) {
        if (a.reference_traces.empty()) throw Error("--reference-source predicted needs --reference-traces");
        cfg.predicted_references =
            std::make_shared<PredictedDescriptions>(predicted_descriptions(read_traces(a.reference_traces).episodes));
    }
    cfg.validate();

    std::optional<RetrievalIndex> index;
    if (cfg.strategy.uses_reference()) index.emplace(ds.episodes);

    BackendFactory factory;
    std::string backend_id;
    if (a.backend == "scripted") {
        if (a.scripts.empty()) throw Error("--backend scripted needs --scripts");
        factory = scripted_factory(std::make_shared<ScriptBook>(load_scripts(a.scripts)));
        backend_id = "scripted";
    } else {
        auto http = std::make_shared<HttpBackend>(a.base_url, HttpBackend::api_key_from_env(), a.multimodal);
        backend_id = http->identity();
        factory = [http](const Episode&) -> std::shared_ptr<ChatBackend> { return http; };
    }

    std::optional<RateLimiter> limiter;
    GatewayOptions gateway;
    gateway.retry.max_retries = a.max_retries;
    if (a.rpm > 0) {
        limiter.emplace(a.rpm);
        gateway.rate_limiter = &*limiter;
    }

    Json config = {{"strategy", cfg.strategy.name()},
                   {"max_turns", a.max_turns},
                   {"model", a.model},
                   {"max_tokens", a.max_tokens},
                   {"temperature", a.temperature},
                   {"grounding", a.grounding},
                   {"reference_k", a.reference_k},
                   {"reference_source", a.reference_source},
                   {"reference_pool", a.reference_pool},
                   {"plan_file", a.plan_file},
                   {"subsets", a.subsets},
                   {"sample_per_subset", a.sample_per_subset},
                   {"seed", a.seed},
                   {"prompt_budget", a.prompt_budget},
                   {"store_prompts", a.store_prompts}};
    RunManifest manifest;
    manifest.config = config;
    manifest.dataset = dataset_manifest_json(ds.manifest);
    manifest.backend = backend_id;
    manifest.run_id = "run-" + util::hex64(util::fnv1a64(config.dump() + ds.manifest.source + backend_id));
    RunWriter writer(a.out, manifest);

    std::size_t done = 0, aborted = 0;
    run_episodes(episodes, cfg, factory, index ? &*index : nullptr, gateway, a.parallel,
                 [&](const Episode&, EpisodeTrace t) {
                     ++done;
                     if (t.aborted) {
                         ++aborted;
                         err << "episode " << t.episode_id << " aborted: " << t.abort_reason << "\n";
                     }
                     writer.append(t);
                 });
    writer.finish();
    out << "ran " << done << " episodes with " << cfg.strategy.name() << " -> " << a.out << "\n";
    if (aborted) {
        err << aborted << " episode(s) aborted\n";
        return 3;
    }
    return 0;
}

inline int do_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
    const TraceFile tf = read_traces(a.traces);
    if (tf.truncated_tail) err << "warning: ignored a truncated final trace record\n";
    if (tf.partial) err << "warning: episode " << tf.partial->episode_id << " has no end record and is not scored\n";
    if (tf.episodes.empty()) throw Error("no complete episodes in " + a.traces);
    const Dataset ds = load_dataset(a.dataset);
    MatchOptions opts;
    opts.click_threshold = a.click_threshold;
    opts.strict_text = a.strict_text;
    const Report report = build_report(tf.episodes, ds.episodes, opts, a.weighted);
    const auto format = report_format_from_name(a.format);
    if (a.out.empty()) {
        out << render_report(report, *format);
    } else {
        write_report(report, *format, a.out);
        out << "overall " << util::fixed(report.scores.overall, 2) << " over " << report.episodes.size()
            << " episodes -> " << a.out << "\n";
    }
    return 0;
}

inline int do_report(const ReportArgs& a, std::ostream& out) {
    std::ifstream in(a.scores);
    if (!in) throw Error("cannot read scores " + a.scores);
    const Report report = report_from_json(Json::parse(in));
    const auto format = report_format_from_name(a.format);
    if (a.out.empty())
        out << render_report(report, *format);
    else
        write_report(report, *format, a.out);
    return 0;
}

inline int do_gen(const GenArgs& a, std::ostream& out) {
    const Dataset ds = generate_synthetic(a.seed, a.episodes, a.params);
    save_dataset(a.out, ds.episodes);
    const Strategy st = Strategy::parse(a.strategy, parse_history_len(a.history_len));
    const Grounding g = parse_grounding(a.grounding);
    if (!a.oracle_scripts.empty()) save_scripts(a.oracle_scripts, script_book(ds.episodes, st, g, false));
    if (!a.wrong_scripts.empty()) save_scripts(a.wrong_scripts, script_book(ds.episodes, st, g, true));
    out << "wrote " << ds.episodes.size() << " episodes -> " << a.out << "\n";
    return 0;
}

/// Reports every schema and invariant violation in a dataset file.
inline int do_validate(const std::string& path, std::ostream& out) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read dataset file " + path);
    std::size_t lineno = 0, episodes = 0, problems = 0;
    std::set<std::string> seen;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        const auto report = [&](const std::string& msg) {
            ++problems;
            out << path << ":" << lineno << ": " << msg << "\n";
        };
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            report("invalid JSON");
            continue;
        }
        Episode e;
        try {
            e = episode_from_json(j);
        } catch (const DatasetError& de) {
            report(de.what());
            continue;
        }
        ++episodes;
        if (!seen.insert(e.id).second) report("id: duplicate episode id \"" + e.id + "\"");
        for (const auto& v : validate_episode(e)) report(v.field + ": " + v.message);
    }
    out << episodes << " episodes, " << problems << " problem(s)\n";
    return problems ? 1 : 0;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Dynamic planning agent runtime and replay evaluator", "dpot"};
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    const std::vector<std::string> strategies = {"np", "sp", "dp", "dpot", "dpot-ref", "react"};

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run episodes under a strategy and write traces");
    run_cmd->add_option("--dataset", run.dataset, "Episode file (JSONL)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--subset", run.subsets, "Only these subsets (repeatable)");
    run_cmd->add_option("--sample-per-subset", run.sample_per_subset, "Episodes sampled per subset, 0 = all")
        ->capture_default_str();
    run_cmd->add_option("--seed", run.seed, "Seed for sampling")->capture_default_str();
    run_cmd->add_option("--strategy", run.strategy, "One of np, sp, dp, dpot, dpot-ref, react")
        ->check(CLI::IsMember(strategies))
        ->capture_default_str();
    auto* history_opt =
        run_cmd->add_option("--history-len", run.history_len, "ReAct rounds kept in the prompt, or inf")->capture_default_str();
    run_cmd->add_option("--max-turns", run.max_turns, "Turn cap per episode, 0 = episode length")->capture_default_str();
    run_cmd->add_flag("--reference", run.reference, "Prepend similar episodes to the planning prompt (dpot only)");
    run_cmd->add_option("--reference-k", run.reference_k, "Reference episodes per prompt")->capture_default_str();
    run_cmd->add_option("--reference-source", run.reference_source, "gold or predicted action sequences")
        ->check(CLI::IsMember({"gold", "predicted"}))
        ->capture_default_str();
    run_cmd->add_option("--reference-traces", run.reference_traces, "Earlier run supplying predicted references");
    run_cmd->add_option("--reference-pool", run.reference_pool, "same-subset or all")
        ->check(CLI::IsMember({"same-subset", "all"}))
        ->capture_default_str();
    run_cmd->add_option("--backend", run.backend, "http or scripted")
        ->check(CLI::IsMember({"http", "scripted"}))
        ->capture_default_str();
    run_cmd->add_option("--scripts", run.scripts, "Scripted responses (JSONL)")->check(CLI::ExistingFile);
    run_cmd->add_option("--base-url", run.base_url, "Chat-completions endpoint base")->capture_default_str();
    run_cmd->add_flag("--multimodal", run.multimodal, "Attach screenshot handles to prompts");
    run_cmd->add_option("--model", run.model, "Model name")->capture_default_str();
    run_cmd->add_option("--max-tokens", run.max_tokens, "Completion token cap")->capture_default_str();
    run_cmd->add_option("--temperature", run.temperature, "Sampling temperature")->capture_default_str();
    run_cmd->add_option("--grounding", run.grounding, "model: a grounding call; grammar: parse the step text")
        ->check(CLI::IsMember({"model", "grammar"}))
        ->capture_default_str();
    run_cmd->add_option("--rpm", run.rpm, "Requests per minute across all episodes, 0 = unlimited")->capture_default_str();
    run_cmd->add_option("--max-retries", run.max_retries, "Retries for transient failures")->capture_default_str();
    run_cmd->add_option("--prompt-budget", run.prompt_budget, "Estimated prompt token cap, 0 = none")->capture_default_str();
    run_cmd->add_option("--plan-file", run.plan_file, "Externally written plans (JSONL)")->check(CLI::ExistingFile);
    run_cmd->add_option("--out", run.out, "Run directory")->required();
    run_cmd->add_option("--parallel", run.parallel, "Concurrent episodes")->capture_default_str()->check(CLI::PositiveNumber);
    run_cmd->add_flag("--store-prompts", run.store_prompts, "Keep full prompt text in traces");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Score traces against the gold actions");
    score_cmd->add_option("--traces", score.traces, "Run directory or trace file")->required()->check(CLI::ExistingPath);
    score_cmd->add_option("--dataset", score.dataset, "Episode file (JSONL)")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--out", score.out, "Report file, stdout when omitted");
    score_cmd->add_option("--format", score.format, "json, csv or text")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    score_cmd->add_flag("--weighted", score.weighted, "Overall as the mean over episodes instead of subsets");
    score_cmd->add_flag("--strict-text", score.strict_text, "Type actions must also match text");
    score_cmd->add_option("--click-threshold", score.click_threshold, "Click distance threshold")->capture_default_str();

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Render a JSON score report as tables");
    report_cmd->add_option("--scores", report.scores, "JSON report from score")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--format", report.format, "json, csv or text")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    report_cmd->add_option("--out", report.out, "Output file, stdout when omitted");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic dataset and matching scripts");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    gen_cmd->add_option("--episodes", gen.episodes, "Episode count")->capture_default_str()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--out", gen.out, "Dataset file to write")->required();
    gen_cmd->add_option("--oracle-scripts", gen.oracle_scripts, "Also write scripts that reproduce the gold actions");
    gen_cmd->add_option("--wrong-scripts", gen.wrong_scripts, "Also write scripts that always miss");
    gen_cmd->add_option("--strategy", gen.strategy, "Strategy the scripts are written for")
        ->check(CLI::IsMember(strategies))
        ->capture_default_str();
    gen_cmd->add_option("--history-len", gen.history_len, "ReAct history length for the scripts")->capture_default_str();
    gen_cmd->add_option("--grounding", gen.grounding, "model or grammar")
        ->check(CLI::IsMember({"model", "grammar"}))
        ->capture_default_str();
    gen_cmd->add_option("--min-steps", gen.params.min_steps)->capture_default_str();
    gen_cmd->add_option("--max-steps", gen.params.max_steps)->capture_default_str();
    gen_cmd->add_option("--min-elements", gen.params.min_elements)->capture_default_str();
    gen_cmd->add_option("--max-elements", gen.params.max_elements)->capture_default_str();

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a dataset file and list every violation");
    validate_cmd->add_option("--dataset", validate_path, "Episode file (JSONL)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run_cmd) return do_run(run, history_opt->count() > 0, out, err);
        if (*score_cmd) return do_score(score, out, err);
        if (*report_cmd) return do_report(report, out);
        if (*gen_cmd) return do_gen(gen, out);
        if (*validate_cmd) return do_validate(validate_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace dpot::cli
