#include <gtest/gtest.h>

#include <fstream>

#include "dpot/reporting.hpp"
#include "dpot/scripts.hpp"
#include "dpot/synthetic.hpp"
#include "helpers.hpp"

using namespace dpot;
using testing_support::make_episode;
using testing_support::slurp;

namespace {

const Strategy kDpot{Strategy::Kind::DPoT, {}};

std::vector<EpisodeTrace> oracle_traces(const std::vector<Episode>& eps, Strategy s = kDpot) {
    auto book = std::make_shared<ScriptBook>(script_book(eps, s, Grounding::ModelCall));
    RunConfig cfg;
    cfg.strategy = s;
    std::vector<EpisodeTrace> out;
    run_episodes(eps, cfg, scripted_factory(book), nullptr, {}, 1, [&](const Episode&, EpisodeTrace t) { out.push_back(std::move(t)); });
    return out;
}

TurnRecord usage_turn(int turn, std::int64_t prompt, std::int64_t completion, bool estimated = false) {
    TurnRecord r;
    r.turn = turn;
    r.usage = {prompt, completion, estimated};
    r.latency_s = 0.5;
    return r;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace

TEST(Traces, RoundTripIsLossless) {
    const auto ds = generate_synthetic(3, 6);
    auto traces = oracle_traces(ds.episodes);
    traces[0].turns[0].notes = {"recovery:code_fence_stripped"};
    traces[0].turns[0].action = Click{Point{0.25, 0.75}};
    traces[1].turns.back().action.reset();
    traces[1].turns.back().action_error = "no_object: no JSON object found";
    traces[2].aborted = true;
    traces[2].abort_reason = "HTTP 401";
    traces[2].terminated_by.reset();
    const auto dir = testing_support::temp_dir("rt");
    std::string all;
    for (const auto& t : traces) all += serialize_trace(t);
    write_file(dir / "traces.jsonl", all);
    const auto back = read_traces(dir / "traces.jsonl");
    ASSERT_EQ(back.episodes.size(), traces.size());
    EXPECT_FALSE(back.partial);
    EXPECT_FALSE(back.truncated_tail);
    std::string again;
    for (const auto& t : back.episodes) again += serialize_trace(t);
    EXPECT_EQ(again, all);
    EXPECT_EQ(back.episodes[0].turns[0].action, (Action{Click{Point{0.25, 0.75}}}));
    std::filesystem::remove_all(dir);
}

TEST(Traces, RecordShape) {
    const auto e = make_episode("shape", {Click{1}, StatusComplete{}});
    const auto t = oracle_traces({e}).front();
    const auto lines = util::split_lines(serialize_trace(t));
    ASSERT_EQ(lines.size(), 3u);
    const auto j = Json::parse(lines[0]);
    for (const char* key : {"episode_id", "turn", "strategy", "prompt_digest", "raw_plan_text", "step", "action", "usage", "latency_s"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["action"]["action_type"], "click");
    EXPECT_EQ(j["strategy"], "dpot");
    const auto footer = Json::parse(lines[2]);
    EXPECT_EQ(footer["record"], "episode_end");
    EXPECT_EQ(footer["terminated_by"], "status_complete");
}

TEST(Traces, TornWriteKeepsValidPrefix) {
    const auto e = make_episode("torn", {Click{1}, PressEnter{}, PressEnter{}, StatusComplete{}});
    const auto t = oracle_traces({e}).front();
    const auto lines = util::split_lines(serialize_trace(t));
    const auto dir = testing_support::temp_dir("torn");
    write_file(dir / "traces.jsonl", lines[0] + "\n" + lines[1] + "\n" + lines[2].substr(0, lines[2].size() / 2));
    const auto back = read_traces(dir);
    EXPECT_TRUE(back.truncated_tail);
    EXPECT_EQ(back.records, 2u);
    ASSERT_TRUE(back.partial);
    EXPECT_EQ(back.partial->turns.size(), 2u);
    EXPECT_TRUE(back.episodes.empty());

    write_file(dir / "traces.jsonl", lines[0] + "\n{broken\n" + lines[1] + "\n");
    EXPECT_THROW(read_traces(dir), Error);
    std::filesystem::remove_all(dir);
}

TEST(RunDir, WriterAppendsAndRefusesReuse) {
    const auto ds = generate_synthetic(5, 3);
    const auto traces = oracle_traces(ds.episodes);
    const auto dir = testing_support::temp_dir("run") / "out";
    {
        RunWriter w(dir, RunManifest{"run-1", {{"strategy", "dpot"}}, {}, "", "", "scripted"});
        for (const auto& t : traces) w.append(t);
        w.finish();
    }
    const auto back = read_traces(dir);
    EXPECT_EQ(back.episodes.size(), 3u);
    std::size_t turns = 0;
    for (const auto& t : traces) turns += t.turns.size();
    EXPECT_EQ(back.records, turns + 3);
    const auto m = read_manifest(dir);
    EXPECT_EQ(m.run_id, "run-1");
    EXPECT_FALSE(m.started_at.empty());
    EXPECT_FALSE(m.finished_at.empty());
    EXPECT_EQ(m.backend, "scripted");
    EXPECT_THROW(RunWriter(dir, RunManifest{"run-2", {}, {}, "", "", ""}), Error);
    std::filesystem::remove_all(dir.parent_path());
}

TEST(Canonicalize, BlanksTimingOnly) {
    const std::string line = R"({"a":1,"latency_s":3.25,"started_at":"2024-01-01T00:00:00Z","dataset":{"loaded_at":"x"}})";
    EXPECT_EQ(canonicalize_line(line), R"({"a":1,"latency_s":0.0,"started_at":"","dataset":{"loaded_at":""}})");
}

TEST(Cost, SumsUsagePerEpisode) {
    EpisodeTrace t;
    t.turns = {usage_turn(0, 100, 0), usage_turn(1, 40, 10)};
    EpisodeTrace aborted;
    aborted.aborted = true;
    const auto one = cost_summary({t});
    EXPECT_DOUBLE_EQ(one.tokens_per_episode, 150.0);
    EXPECT_DOUBLE_EQ(one.seconds_per_episode, 1.0);
    EXPECT_DOUBLE_EQ(one.estimated_fraction, 0.0);
    const auto two = cost_summary({t, aborted});
    EXPECT_DOUBLE_EQ(two.tokens_per_episode, 75.0);
    EXPECT_THROW(cost_summary({}), Error);
}

TEST(Cost, EstimatedFraction) {
    EpisodeTrace t;
    t.turns = {usage_turn(0, 30, 0, true), usage_turn(1, 10, 0, false)};
    EXPECT_DOUBLE_EQ(cost_summary({t}).estimated_fraction, 0.75);
}

TEST(Cost, DpotCheaperThanUnboundedReact) {
    std::vector<Action> acts(6, Action{PressEnter{}});
    acts.back() = StatusComplete{};
    const auto e = make_episode("cost", acts, 40);
    const auto dpot = cost_summary(oracle_traces({e}));
    const auto react = cost_summary(oracle_traces({e}, Strategy::react(std::nullopt)));
    EXPECT_LT(dpot.tokens_per_episode, react.tokens_per_episode);
}

TEST(Report, LayoutAndDeterminism) {
    auto ds = generate_synthetic(12, 25);
    const auto traces = oracle_traces(ds.episodes);
    const auto report = build_report(traces, ds.episodes);
    EXPECT_EQ(report.scores.subsets.size(), 5u);
    EXPECT_NEAR(report.scores.overall, 100.0, 1e-9);

    const auto csv = util::split_lines(render_report(report, ReportFormat::Csv));
    ASSERT_GE(csv.size(), 2u);
    EXPECT_EQ(std::count(csv[0].begin(), csv[0].end(), ','), 6);
    EXPECT_NE(csv[0].find(",Overall"), std::string::npos);

    const std::vector<std::string> order = {"Click", "Scroll", "Type", "Home", "Back", "Press", "Complete"};
    const auto text = render_report(report, ReportFormat::Text);
    std::size_t last = 0;
    for (const auto& label : order) {
        const auto p = text.find("\n" + label + " ");
        ASSERT_NE(p, std::string::npos) << label;
        EXPECT_GT(p, last);
        last = p;
    }

    const auto dir = testing_support::temp_dir("report");
    for (auto f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text}) {
        write_report(report, f, dir / "a");
        write_report(report, f, dir / "b");
        EXPECT_EQ(slurp(dir / "a"), slurp(dir / "b"));
    }
    EXPECT_THROW(write_report(report, ReportFormat::Json, dir / "missing" / "x.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST(Report, JsonRoundTrip) {
    const auto ds = generate_synthetic(4, 10);
    const auto report = build_report(oracle_traces(ds.episodes), ds.episodes);
    const auto j = report_to_json(report);
    EXPECT_EQ(report_to_json(report_from_json(j)), j);
    EXPECT_EQ(j["breakdown"]["rows"].size(), 7u);
}

TEST(Report, FormatNames) {
    EXPECT_EQ(report_format_from_name("json"), ReportFormat::Json);
    EXPECT_EQ(report_format_from_name("csv"), ReportFormat::Csv);
    EXPECT_EQ(report_format_from_name("text"), ReportFormat::Text);
    EXPECT_FALSE(report_format_from_name("xml"));
}

TEST(Report, UnknownEpisodeRejected) {
    const auto ds = generate_synthetic(4, 2);
    auto traces = oracle_traces(ds.episodes);
    traces[0].episode_id = "ghost";
    EXPECT_THROW(build_report(traces, ds.episodes), Error);
}

TEST(Report, PredictedDescriptionsFromTraces) {
    const auto e = make_episode("p", {Click{1}, Scroll{ScrollDirection::Up}, StatusComplete{}});
    const auto pd = predicted_descriptions(oracle_traces({e}));
    EXPECT_EQ(pd.at("p"), (std::vector<std::string>{"click [item 1]", "scroll up", "status_complete"}));
}
