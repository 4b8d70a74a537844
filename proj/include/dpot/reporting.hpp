#pragma once

// Run directories, trace persistence, cost summaries and report rendering.
//
// A run directory holds
//   manifest.json   run id, config snapshot, dataset manifest, timestamps, backend
//   traces.jsonl    one "turn" record per turn, then one "episode_end" record per episode
//
// Episodes are appended whole and flushed, so a crash leaves a readable prefix.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "dpot/dataset.hpp"
#include "dpot/evaluator.hpp"

namespace dpot {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTracesFile = "traces.jsonl";

// ---------------------------------------------------------------------------
// Trace records

inline Json usage_to_json(const UsageStats& u) {
    return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}, {"estimated", u.estimated}};
}

inline UsageStats usage_from_json(const Json& j) {
    return {j.at("prompt_tokens").get<std::int64_t>(), j.at("completion_tokens").get<std::int64_t>(),
            j.value("estimated", false)};
}

inline Json trace_action_to_json(const Action& a) {
    return Json::parse(action_to_json(a).dump());
}

inline Action trace_action_from_json(const Json& j) {
    const std::string name = j.at("action_type").get<std::string>();
    const auto type = action_type_from_name(name);
    if (!type) throw Error("trace: unknown action_type " + name);
    switch (*type) {
        case ActionType::Click:
            if (j.contains("point")) return Click{Point{j["point"].at(0).get<double>(), j["point"].at(1).get<double>()}};
            return Click{j.at("idx").get<int>()};
        case ActionType::Scroll: {
            const auto d = direction_from_name(j.at("direction").get<std::string>());
            if (!d) throw Error("trace: bad scroll direction");
            return Scroll{*d};
        }
        case ActionType::Type: return TypeText{j.at("text").get<std::string>()};
        case ActionType::NavigateHome: return Navigate{NavDestination::Home};
        case ActionType::NavigateBack: return Navigate{NavDestination::Back};
        case ActionType::PressEnter: return PressEnter{};
        case ActionType::StatusComplete: return StatusComplete{};
    }
    throw Error("trace: unreachable action type");
}

inline Json turn_to_json(const std::string& episode_id, const Strategy& strategy, const TurnRecord& r) {
    Json j;
    j["record"] = "turn";
    j["episode_id"] = episode_id;
    j["turn"] = r.turn;
    j["strategy"] = strategy.name();
    j["prompt_digest"] = r.prompt_digest;
    if (!r.prompts.empty()) j["prompts"] = r.prompts;
    if (!r.raw_plan_text.empty()) j["raw_plan_text"] = r.raw_plan_text;
    if (r.plan) j["plan"] = {{"steps", r.plan->steps}, {"raw", r.plan->raw}};
    if (r.step) j["step"] = r.step->text;
    if (!r.raw_action_text.empty()) j["raw_action_text"] = r.raw_action_text;
    if (r.action) j["action"] = trace_action_to_json(*r.action);
    if (!r.action_error.empty()) j["action_error"] = r.action_error;
    j["history_entry"] = r.history_entry;
    j["notes"] = r.notes;
    j["usage"] = usage_to_json(r.usage);
    j["calls"] = r.calls;
    j["latency_s"] = r.latency_s;
    return j;
}

inline TurnRecord turn_from_json(const Json& j) {
    TurnRecord r;
    r.turn = j.at("turn").get<int>();
    r.prompt_digest = j.value("prompt_digest", "");
    if (j.contains("prompts")) r.prompts = j["prompts"].get<std::vector<std::string>>();
    r.raw_plan_text = j.value("raw_plan_text", "");
    if (j.contains("plan")) r.plan = Plan{j["plan"].at("steps").get<std::vector<std::string>>(), j["plan"].at("raw").get<std::string>()};
    if (j.contains("step")) r.step = ChosenStep{j["step"].get<std::string>()};
    r.raw_action_text = j.value("raw_action_text", "");
    if (j.contains("action")) r.action = trace_action_from_json(j["action"]);
    r.action_error = j.value("action_error", "");
    r.history_entry = j.value("history_entry", "");
    if (j.contains("notes")) r.notes = j["notes"].get<std::vector<std::string>>();
    r.usage = usage_from_json(j.at("usage"));
    r.calls = j.value("calls", 0);
    r.latency_s = j.value("latency_s", 0.0);
    return r;
}

inline Json episode_footer_json(const EpisodeTrace& t) {
    Json j;
    j["record"] = "episode_end";
    j["episode_id"] = t.episode_id;
    j["strategy"] = t.strategy.name();
    j["turns"] = t.turns.size();
    if (t.terminated_by) j["terminated_by"] = std::string(termination_name(*t.terminated_by));
    j["aborted"] = t.aborted;
    if (!t.abort_reason.empty()) j["abort_reason"] = t.abort_reason;
    return j;
}

/// All lines for one episode, newline-terminated.
inline std::string serialize_trace(const EpisodeTrace& t) {
    std::string out;
    for (const auto& r : t.turns) out += turn_to_json(t.episode_id, t.strategy, r).dump() + "\n";
    out += episode_footer_json(t).dump() + "\n";
    return out;
}

struct TraceFile {
    std::vector<EpisodeTrace> episodes;  // complete episodes, in file order
    std::optional<EpisodeTrace> partial;  // turns of an episode whose footer never made it to disk
    std::size_t records = 0;              // valid records read
    bool truncated_tail = false;          // the last line was cut off and ignored
};

/// Reads a trace file (or the traces of a run directory). A malformed final
/// line is treated as a torn write and skipped; malformed lines elsewhere are errors.
inline TraceFile read_traces(const fs::path& path_or_dir) {
    const fs::path path = fs::is_directory(path_or_dir) ? path_or_dir / kTracesFile : path_or_dir;
    std::ifstream in(path);
    if (!in) throw Error("cannot read traces " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));

    TraceFile out;
    std::optional<EpisodeTrace> open;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (util::trim(lines[i]).empty()) continue;
        Json j = Json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            if (i + 1 == lines.size()) {
                out.truncated_tail = true;
                break;
            }
            throw Error(path.string() + ":" + std::to_string(i + 1) + ": malformed trace record");
        }
        try {
            const std::string kind = j.at("record").get<std::string>();
            const std::string id = j.at("episode_id").get<std::string>();
            const Strategy strategy = Strategy::parse(j.at("strategy").get<std::string>());
            if (open && open->episode_id != id)
                throw Error("turn records of episode " + open->episode_id + " are not closed");
            if (!open) {
                open = EpisodeTrace{};
                open->episode_id = id;
                open->strategy = strategy;
            }
            if (kind == "turn") {
                open->turns.push_back(turn_from_json(j));
            } else if (kind == "episode_end") {
                if (j.at("turns").get<std::size_t>() != open->turns.size())
                    throw Error("episode " + id + " footer turn count disagrees with its records");
                if (j.contains("terminated_by")) {
                    open->terminated_by = termination_from_name(j["terminated_by"].get<std::string>());
                    if (!open->terminated_by) throw Error("unknown termination verdict");
                }
                open->aborted = j.value("aborted", false);
                open->abort_reason = j.value("abort_reason", "");
                out.episodes.push_back(std::move(*open));
                open.reset();
            } else {
                throw Error("unknown record kind " + kind);
            }
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        ++out.records;
    }
    out.partial = std::move(open);
    return out;
}

/// Executed-action descriptions per episode, for reference blocks built from an earlier run.
inline PredictedDescriptions predicted_descriptions(const std::vector<EpisodeTrace>& traces) {
    PredictedDescriptions out;
    for (const auto& t : traces) {
        auto& d = out[t.episode_id];
        for (const auto& r : t.turns) d.push_back(r.history_entry);
    }
    return out;
}

/// Timing and timestamp fields zeroed so that repeated runs compare byte for byte.
inline std::string canonicalize_line(const std::string& line) {
    Json j = Json::parse(line);
    if (j.contains("latency_s")) j["latency_s"] = 0.0;
    for (const char* key : {"started_at", "finished_at", "loaded_at"})
        if (j.contains(key)) j[key] = "";
    if (j.contains("dataset") && j["dataset"].is_object() && j["dataset"].contains("loaded_at"))
        j["dataset"]["loaded_at"] = "";
    return j.dump();
}

inline std::string canonicalize_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::string out;
    for (std::string line; std::getline(in, line);)
        if (!util::trim(line).empty()) out += canonicalize_line(line) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Run directory

struct RunManifest {
    std::string run_id;
    Json config = Json::object();
    Json dataset = Json::object();
    std::string started_at;
    std::string finished_at;
    std::string backend;

    Json to_json() const {
        return {{"run_id", run_id}, {"config", config},         {"dataset", dataset},
                {"started_at", started_at}, {"finished_at", finished_at}, {"backend", backend}};
    }

    static RunManifest from_json(const Json& j) {
        return {j.at("run_id").get<std::string>(), j.value("config", Json::object()), j.value("dataset", Json::object()),
                j.value("started_at", ""), j.value("finished_at", ""), j.value("backend", "")};
    }
};

inline Json dataset_manifest_json(const DatasetManifest& m) {
    Json counts = Json::object();
    for (const auto& [k, v] : m.subset_counts) counts[k] = v;
    return {{"source", m.source}, {"loaded_at", m.loaded_at}, {"subset_counts", counts}};
}

inline RunManifest read_manifest(const fs::path& dir) {
    std::ifstream in(dir / kManifestFile);
    if (!in) throw Error("cannot read " + (dir / kManifestFile).string());
    return RunManifest::from_json(Json::parse(in));
}

/// Single writer for one run directory; safe to share between threads.
class RunWriter {
public:
    RunWriter(const fs::path& dir, RunManifest manifest) : dir_(dir), manifest_(std::move(manifest)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error("cannot create run directory " + dir_.string() + ": " + ec.message());
        if (fs::exists(dir_ / kManifestFile))
            throw Error("run directory " + dir_.string() + " already holds run " + read_manifest(dir_).run_id);
        if (manifest_.started_at.empty()) manifest_.started_at = detail::utc_now_iso();
        write_manifest();
        traces_.open(dir_ / kTracesFile, std::ios::trunc | std::ios::binary);
        if (!traces_) throw Error("cannot write " + (dir_ / kTracesFile).string());
    }

    const fs::path& dir() const { return dir_; }

    void append(const EpisodeTrace& t) {
        const std::string block = serialize_trace(t);
        std::lock_guard lock(mu_);
        traces_ << block;
        traces_.flush();
        if (!traces_) throw Error("write failed for " + (dir_ / kTracesFile).string());
    }

    void finish() {
        std::lock_guard lock(mu_);
        traces_.close();
        manifest_.finished_at = detail::utc_now_iso();
        write_manifest();
    }

private:
    void write_manifest() {
        std::ofstream m(dir_ / kManifestFile, std::ios::trunc | std::ios::binary);
        m << manifest_.to_json().dump(2) << "\n";
        if (!m) throw Error("cannot write " + (dir_ / kManifestFile).string());
    }

    fs::path dir_;
    RunManifest manifest_;
    std::ofstream traces_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Cost and reports

struct CostSummary {
    std::size_t episodes = 0;
    double tokens_per_episode = 0.0;
    double seconds_per_episode = 0.0;
    double estimated_fraction = 0.0;  // share of tokens that came from the length estimate
};

inline CostSummary cost_summary(const std::vector<EpisodeTrace>& traces) {
    if (traces.empty()) throw Error("cost_summary: no traces");
    CostSummary c;
    c.episodes = traces.size();
    double tokens = 0.0, seconds = 0.0, estimated = 0.0;
    for (const auto& t : traces)
        for (const auto& r : t.turns) {
            tokens += static_cast<double>(r.usage.total());
            seconds += r.latency_s;
            if (r.usage.estimated) estimated += static_cast<double>(r.usage.total());
        }
    c.tokens_per_episode = tokens / static_cast<double>(traces.size());
    c.seconds_per_episode = seconds / static_cast<double>(traces.size());
    c.estimated_fraction = tokens > 0 ? estimated / tokens : 0.0;
    return c;
}

struct Report {
    std::string strategy;
    std::vector<EpisodeScore> episodes;
    SubsetReport scores;
    ActionBreakdown breakdown;
    std::optional<CostSummary> cost;
};

/// Scores complete traces against the dataset. Traces for unknown episodes are an error.
inline Report build_report(const std::vector<EpisodeTrace>& traces, const std::vector<Episode>& episodes,
                           const MatchOptions& opts = {}, bool weighted = false) {
    std::map<std::string, const Episode*> by_id;
    for (const auto& e : episodes) by_id[e.id] = &e;
    Report r;
    for (const auto& t : traces) {
        const auto it = by_id.find(t.episode_id);
        if (it == by_id.end()) throw Error("trace for unknown episode " + t.episode_id);
        r.episodes.push_back(score_episode(t, *it->second, opts));
        if (r.strategy.empty()) r.strategy = t.strategy.name();
        else if (r.strategy != t.strategy.name()) r.strategy = "mixed";
    }
    r.scores = aggregate(r.episodes, weighted);
    r.breakdown = action_breakdown(traces, episodes, opts);
    r.cost = cost_summary(traces);
    return r;
}

enum class ReportFormat { Json, Csv, Text };

inline std::optional<ReportFormat> report_format_from_name(std::string_view s) {
    if (s == "json") return ReportFormat::Json;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "text" || s == "txt") return ReportFormat::Text;
    return std::nullopt;
}

inline Json report_to_json(const Report& r) {
    Json subsets = Json::object();
    for (const auto& [name, s] : r.scores.subsets) subsets[name] = {{"mean", s.mean}, {"episodes", s.episodes}};
    Json rows = Json::array();
    for (const auto& row : r.breakdown.rows)
        rows.push_back({{"action_type", std::string(action_type_label(row.type))},
                        {"predicted", row.predicted},
                        {"correct", row.correct},
                        {"predicted_ratio", row.predicted_ratio},
                        {"accuracy_ratio", row.accuracy_ratio}});
    Json eps = Json::array();
    for (const auto& e : r.episodes)
        eps.push_back({{"episode_id", e.episode_id}, {"subset", e.subset}, {"correct", e.correct}, {"total", e.total}, {"score", e.score}});
    Json j = {{"strategy", r.strategy},
              {"subsets", subsets},
              {"overall", r.scores.overall},
              {"weighted", r.scores.weighted},
              {"breakdown",
               {{"evaluated_turns", r.breakdown.evaluated_turns}, {"unparsed", r.breakdown.unparsed}, {"rows", rows}}},
              {"episodes", eps}};
    if (r.cost)
        j["cost"] = {{"episodes", r.cost->episodes},
                     {"tokens_per_episode", r.cost->tokens_per_episode},
                     {"seconds_per_episode", r.cost->seconds_per_episode},
                     {"estimated_fraction", r.cost->estimated_fraction}};
    return j;
}

inline Report report_from_json(const Json& j) {
    Report r;
    r.strategy = j.value("strategy", "");
    for (const auto& [name, s] : j.at("subsets").items())
        r.scores.subsets[name] = {s.at("mean").get<double>(), s.at("episodes").get<std::size_t>()};
    r.scores.overall = j.at("overall").get<double>();
    r.scores.weighted = j.value("weighted", false);
    const auto& b = j.at("breakdown");
    r.breakdown.evaluated_turns = b.at("evaluated_turns").get<std::size_t>();
    r.breakdown.unparsed = b.at("unparsed").get<std::size_t>();
    for (const auto& row : b.at("rows")) {
        const std::string label = row.at("action_type").get<std::string>();
        std::optional<ActionType> type;
        for (auto t : kAllActionTypes)
            if (action_type_label(t) == label) type = t;
        if (!type) throw Error("report: unknown action type " + label);
        r.breakdown.rows.push_back({*type, row.at("predicted").get<std::size_t>(), row.at("correct").get<std::size_t>(),
                                    row.at("predicted_ratio").get<double>(), row.at("accuracy_ratio").get<double>()});
    }
    for (const auto& e : j.value("episodes", Json::array())) {
        EpisodeScore s;
        s.episode_id = e.at("episode_id").get<std::string>();
        s.subset = e.at("subset").get<std::string>();
        s.correct = e.at("correct").get<int>();
        s.total = e.at("total").get<int>();
        s.score = e.at("score").get<double>();
        r.episodes.push_back(std::move(s));
    }
    if (j.contains("cost")) {
        const auto& c = j["cost"];
        r.cost = CostSummary{c.at("episodes").get<std::size_t>(), c.at("tokens_per_episode").get<double>(),
                             c.at("seconds_per_episode").get<double>(), c.at("estimated_fraction").get<double>()};
    }
    return r;
}

inline std::string render_report(const Report& r, ReportFormat format) {
    if (format == ReportFormat::Json) return report_to_json(r).dump(2) + "\n";
    std::ostringstream o;
    const auto pct = [](double v) { return util::fixed(v, 2); };
    if (format == ReportFormat::Csv) {
        o << "subset";
        for (const auto& [name, s] : r.scores.subsets) o << ',' << name;
        o << ",Overall\nscore";
        for (const auto& [name, s] : r.scores.subsets) o << ',' << pct(s.mean);
        o << ',' << pct(r.scores.overall) << "\nepisodes";
        std::size_t n = 0;
        for (const auto& [name, s] : r.scores.subsets) {
            o << ',' << s.episodes;
            n += s.episodes;
        }
        o << ',' << n << "\n\naction_type,predicted_ratio,accuracy_ratio\n";
        for (const auto& row : r.breakdown.rows)
            o << action_type_label(row.type) << ',' << pct(row.predicted_ratio) << ',' << pct(row.accuracy_ratio) << "\n";
        o << "Unparsed," << r.breakdown.unparsed << ",\n";
        if (r.cost)
            o << "\nmetric,value\ntokens_per_episode," << util::fixed(r.cost->tokens_per_episode, 1)
              << "\nseconds_per_episode," << util::fixed(r.cost->seconds_per_episode, 2) << "\nestimated_fraction,"
              << util::fixed(r.cost->estimated_fraction, 3) << "\n";
        return o.str();
    }

    o << "Strategy: " << r.strategy << "\n\n";
    std::vector<std::pair<std::string, std::string>> cols;
    for (const auto& [name, s] : r.scores.subsets) cols.emplace_back(name, pct(s.mean));
    cols.emplace_back("Overall", pct(r.scores.overall));
    for (const auto& [h, v] : cols) o << std::setw(static_cast<int>(std::max(h.size(), v.size())) + 2) << h;
    o << "\n";
    for (const auto& [h, v] : cols) o << std::setw(static_cast<int>(std::max(h.size(), v.size())) + 2) << v;
    o << "\n\n" << std::left << std::setw(10) << "Action" << std::right << std::setw(12) << "Predicted" << std::setw(12)
      << "Accurate" << "\n";
    for (const auto& row : r.breakdown.rows)
        o << std::left << std::setw(10) << action_type_label(row.type) << std::right << std::setw(12)
          << pct(row.predicted_ratio) << std::setw(12) << pct(row.accuracy_ratio) << "\n";
    o << "Unparsed predictions: " << r.breakdown.unparsed << " of " << r.breakdown.evaluated_turns << " turns\n";
    if (r.cost)
        o << "\nTokens per episode: " << util::fixed(r.cost->tokens_per_episode, 1)
          << "\nSeconds per episode: " << util::fixed(r.cost->seconds_per_episode, 2)
          << "\nEstimated token share: " << util::fixed(r.cost->estimated_fraction, 3) << "\n";
    return o.str();
}

inline void write_report(const Report& r, ReportFormat format, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write report " + path.string());
    out << render_report(r, format);
    if (!out) throw Error("write failed for report " + path.string());
}

}  // namespace dpot
