#include <gtest/gtest.h>

#include "dpot/history.hpp"
#include "dpot/prompting.hpp"
#include "dpot/synthetic.hpp"
#include "helpers.hpp"

using namespace dpot;

namespace {

const ScreenMarkup kMarkup = serialize_screen(testing_support::rows_screen(4));

std::vector<std::string> history_lines(int n) {
    ExecutionHistory h;
    const auto screen = testing_support::rows_screen(4);
    for (int i = 0; i < n; ++i) h = update_history(h, i, Action{Scroll{ScrollDirection::Up}}, ChosenStep{"s"}, screen);
    return render_history(h);
}

std::size_t pos(const std::string& text, std::string_view needle) {
    const auto p = text.find(needle);
    EXPECT_NE(p, std::string::npos) << "missing: " << needle;
    return p;
}

ReferenceEntry ref_entry(std::string goal, int actions) {
    ReferenceEntry e;
    e.goal = std::move(goal);
    e.initial_caption = "A home screen.";
    for (int i = 0; i + 1 < actions; ++i) e.action_descriptions.push_back(render_history_entry({i, "click [9]"}));
    e.action_descriptions.push_back(render_history_entry({actions - 1, "status_complete"}));
    return e;
}

}  // namespace

TEST(FillTemplate, SinglePassSubstitution) {
    EXPECT_EQ(fill_template("a {x} b {y} {z}", {{"x", "{y}"}, {"y", "2"}}), "a {y} b 2 {z}");
    EXPECT_EQ(fill_template("{'plan': '{x}'}", {{"x", "1"}}), "{'plan': '1'}");
}

TEST(PlanningPrompt, SectionsInOrder) {
    const std::vector<std::string> steps = {"Swipe up", "Tap Settings", "Scroll up"};
    const auto h = history_lines(3);
    const auto text = build_planning_prompt("check out phone information", kMarkup, h, steps).flatten();
    const auto a = pos(text, "Imagine that you are a robot operating a mobile");
    const auto b = pos(text, "**Your ultimate goal is: check out phone information.**");
    const auto c = pos(text, "Screen: <p id=0");
    const auto d = pos(text, "Previous Actions:\n" + h[0]);
    const auto e = pos(text, "Previous Steps:\nStep 1. Swipe up");
    const auto f = pos(text, "A JSON dictionary strictly following the format");
    EXPECT_TRUE(a < b && b < c && c < d && d < e && e < f);
    for (const auto& line : h) EXPECT_NE(text.find(line), std::string::npos);
    EXPECT_NE(text.find("Step 3. Scroll up"), std::string::npos);
}

TEST(PlanningPrompt, FirstTurnUsesNonePlaceholder) {
    const auto text = build_planning_prompt("open the calendar", kMarkup, {}, {}).flatten();
    EXPECT_NE(text.find("Previous Actions:\nNone"), std::string::npos);
    EXPECT_NE(text.find("Previous Steps:\nNone"), std::string::npos);
}

TEST(PlanningPrompt, KeepsCompletionClauseVerbatim) {
    const auto text = build_planning_prompt("g", kMarkup, {}, {}).flatten();
    EXPECT_NE(text.find("{'plan': '1. Mark the task as complete', 'step': 'Mark the task as complet'}"),
              std::string::npos);
    EXPECT_NE(text.find("a mobiel screen"), std::string::npos);
}

TEST(PlanningPrompt, GoalWrapperExactlyOnceOverCorpus) {
    const auto ds = generate_synthetic(21, 15);
    for (const auto& e : ds.episodes) {
        const auto m = serialize_screen(e.steps.front().screen);
        const auto h = history_lines(2);
        const std::vector<std::string> steps = {"a", "b"};
        for (const auto& text : {build_planning_prompt(e.goal, m, h, steps).flatten(),
                                 build_planning_prompt_with_reference(e.goal, m, h, steps, {{ref_entry("r", 2)}}).flatten(),
                                 build_grounding_prompt("do it", m, e.goal).flatten(),
                                 build_baseline_prompt({Strategy::Kind::NP, {}}, e.goal, m, {}).flatten(),
                                 build_baseline_prompt({Strategy::Kind::DP, {}}, e.goal, m, {}).flatten()}) {
            EXPECT_EQ(util::count_occurrences(text, e.goal), 1u) << text;
        }
        EXPECT_EQ(util::count_occurrences(build_planning_prompt(e.goal, m, h, steps).flatten(), "Your ultimate goal is:"), 1u);
    }
}

TEST(PlanningPrompt, EmptyGoalRejected) { EXPECT_THROW(build_planning_prompt("  ", kMarkup, {}, {}), Error); }

TEST(PlanningPrompt, HistorySectionGrowsByOneLinePerTurn) {
    std::size_t prev = 0;
    for (int n = 1; n <= 6; ++n) {
        const auto text = build_planning_prompt("g", kMarkup, history_lines(n), {}).flatten();
        const auto lines = util::count_occurrences(text, "{\"step_idx\": ");
        EXPECT_EQ(lines, static_cast<std::size_t>(n));
        if (n > 1) EXPECT_EQ(lines, prev + 1);
        prev = lines;
    }
}

TEST(PlanningPrompt, BudgetDropsOldestHistoryFirst) {
    const auto h = history_lines(30);
    const std::vector<std::string> steps = {"first step", "second step"};
    const auto full = build_planning_prompt("g", kMarkup, h, steps);
    PromptOptions opts;
    opts.max_prompt_tokens = full.estimated_tokens() - 40;
    const auto text = build_planning_prompt("g", kMarkup, h, steps, opts).flatten();
    EXPECT_LE(estimate_tokens(text), *opts.max_prompt_tokens + 8);
    EXPECT_EQ(text.find(h.front()), std::string::npos);
    EXPECT_NE(text.find(h.back()), std::string::npos);
    EXPECT_NE(text.find("Step 1. first step"), std::string::npos);
    EXPECT_NE(text.find(kMarkup.render()), std::string::npos);
    EXPECT_NE(text.find("**Your ultimate goal is: g.**"), std::string::npos);
}

TEST(ReferencePrompt, TwoReferencesBeforeScreen) {
    ReferenceBlock refs{{ref_entry("buy a lawn mower", 9), ref_entry("check the weather", 10)}};
    const auto text = build_planning_prompt_with_reference("g", kMarkup, {}, {}, refs).flatten();
    EXPECT_NE(text.find("two similar examples as a reference"), std::string::npos);
    EXPECT_LT(pos(text, "Goal: buy a lawn mower"), pos(text, "The current on-screen input is:"));
    EXPECT_LT(pos(text, "Goal: check the weather"), pos(text, "The current on-screen input is:"));
    EXPECT_EQ(util::count_occurrences(text, "\"status_complete\""), 2u);
    EXPECT_EQ(util::count_occurrences(text, "{\"step_idx\": "), 19u);
}

TEST(ReferencePrompt, SingleReference) {
    const auto text = build_planning_prompt_with_reference("g", kMarkup, {}, {}, {{ref_entry("one", 3)}}).flatten();
    EXPECT_NE(text.find("one similar example as a reference"), std::string::npos);
    EXPECT_EQ(util::count_occurrences(text, "Goal: "), 1u);
}

TEST(ReferencePrompt, EmptyRefsRejected) {
    EXPECT_THROW(build_planning_prompt_with_reference("g", kMarkup, {}, {}, {}), Error);
}

TEST(ReferencePrompt, MissingCaptionFallback) {
    ReferenceEntry e = ref_entry("x", 2);
    e.initial_caption.clear();
    EXPECT_NE(render_reference_entry(e).find("Caption: (no caption)"), std::string::npos);
}

TEST(GroundingPrompt, EnumeratesActionTypes) {
    Screen s = testing_support::rows_screen(6);
    s.elements[4].text = "Settings";
    const auto text = build_grounding_prompt("Tap on the 'Settings' icon", serialize_screen(s), "open settings").flatten();
    for (auto t : kAllActionTypes) EXPECT_NE(text.find("\"" + std::string(action_type_name(t)) + "\""), std::string::npos);
    EXPECT_NE(text.find("action_type"), std::string::npos);
    EXPECT_NE(text.find("alt=\"Settings\""), std::string::npos);
    EXPECT_THROW(build_grounding_prompt(" ", kMarkup, "g"), Error);
}

TEST(GroundingPrompt, SmallerThanPlanningPrompt) {
    const auto ds = generate_synthetic(4, 10);
    for (const auto& e : ds.episodes) {
        const auto m = serialize_screen(e.steps.front().screen);
        EXPECT_LT(build_grounding_prompt("click [0]", m, e.goal).estimated_tokens(),
                  build_planning_prompt(e.goal, m, {}, {}).estimated_tokens());
    }
}

TEST(BaselinePrompt, NoPlanningHasNoPlanSection) {
    const auto text = build_baseline_prompt({Strategy::Kind::NP, {}}, "g", kMarkup, {}).flatten();
    EXPECT_EQ(text.find("Plan"), std::string::npos);
    EXPECT_EQ(text.find("Previous Actions"), std::string::npos);
    EXPECT_NE(text.find("action_type"), std::string::npos);
}

TEST(BaselinePrompt, DynamicPlanOnlyHasNoHistorySections) {
    const auto text = build_baseline_prompt({Strategy::Kind::DP, {}}, "g", kMarkup, {3, {}, {}}).flatten();
    EXPECT_EQ(text.find("Previous Actions"), std::string::npos);
    EXPECT_EQ(text.find("Previous Steps"), std::string::npos);
    EXPECT_NE(text.find("'plan'"), std::string::npos);
    EXPECT_EQ(text.find("'step'"), std::string::npos);
}

TEST(BaselinePrompt, StaticPlanFrozenAcrossTurns) {
    const Strategy sp{Strategy::Kind::SP, {}};
    const auto first = build_baseline_prompt(sp, "g", kMarkup, {0, {}, {}}).flatten();
    EXPECT_NE(first.find("'plan'"), std::string::npos);
    const std::string plan = "1. open Settings 2. tap About";
    const auto t2 = build_baseline_prompt(sp, "g", kMarkup, {2, plan, {}}).flatten();
    const auto t3 = build_baseline_prompt(sp, "g", kMarkup, {3, plan, {}}).flatten();
    EXPECT_EQ(t2, t3);
    EXPECT_NE(t3.find("Here is the plan for the task:\n" + plan), std::string::npos);
    EXPECT_EQ(t3.find("Previous Actions"), std::string::npos);
    EXPECT_THROW(build_baseline_prompt(sp, "g", kMarkup, {2, {}, {}}), Error);
}

TEST(BaselinePrompt, ReactWindowKeepsLastRounds) {
    std::vector<ReactRound> rounds;
    for (int i = 1; i <= 5; ++i) rounds.push_back({"Screen: obs" + std::to_string(i), "Thought: t" + std::to_string(i)});
    const auto two = build_baseline_prompt(Strategy::react(2), "g", kMarkup, {5, {}, rounds});
    ASSERT_EQ(two.messages.size(), 1u + 2 * 2 + 1);
    EXPECT_EQ(two.messages.front().role, Role::System);
    const auto flat = two.flatten();
    EXPECT_EQ(flat.find("obs3"), std::string::npos);
    EXPECT_NE(flat.find("obs4"), std::string::npos);
    EXPECT_NE(flat.find("Thought: t5"), std::string::npos);
    EXPECT_EQ(two.messages.back().role, Role::User);
    EXPECT_NE(two.messages.back().text.find(kMarkup.render()), std::string::npos);

    const auto all = build_baseline_prompt(Strategy::react(std::nullopt), "g", kMarkup, {5, {}, rounds});
    EXPECT_EQ(all.messages.size(), 1u + 5 * 2 + 1);
    for (int i = 1; i <= 5; ++i) EXPECT_NE(all.flatten().find("obs" + std::to_string(i)), std::string::npos);

    const auto none = build_baseline_prompt(Strategy::react(0), "g", kMarkup, {5, {}, rounds});
    EXPECT_EQ(none.messages.size(), 2u);
}

TEST(BaselinePrompt, ReactNeedsEveryPriorRound) {
    std::vector<ReactRound> rounds(2);
    EXPECT_THROW(build_baseline_prompt(Strategy::react(4), "g", kMarkup, {3, {}, rounds}), Error);
}

TEST(BaselinePrompt, ReactUnboundedGrowsWithTurns) {
    std::vector<ReactRound> rounds;
    std::int64_t prev = 0;
    for (int t = 0; t < 8; ++t) {
        const auto n = build_baseline_prompt(Strategy::react(std::nullopt), "g", kMarkup, {t, {}, rounds}).estimated_tokens();
        EXPECT_GE(n, prev);
        prev = n;
        rounds.push_back({kMarkup.render(), "Thought: keep going\nAction: {\"action_type\": \"press_enter\"}"});
    }
}

TEST(BaselinePrompt, DpotIsNotABaseline) {
    EXPECT_THROW(build_baseline_prompt({Strategy::Kind::DPoT, {}}, "g", kMarkup, {}), Error);
}

TEST(Strategy, NamesRoundTrip) {
    for (const auto& s : {Strategy{Strategy::Kind::NP, {}}, Strategy{Strategy::Kind::SP, {}}, Strategy{Strategy::Kind::DP, {}},
                          Strategy{Strategy::Kind::DPoT, {}}, Strategy{Strategy::Kind::DPoTWithReference, {}},
                          Strategy::react(0), Strategy::react(4), Strategy::react(std::nullopt)})
        EXPECT_EQ(Strategy::parse(s.name()), s);
    EXPECT_EQ(Strategy::parse("react", 2), Strategy::react(2));
    EXPECT_THROW(Strategy::parse("reflexion"), Error);
}

TEST(Screenshot, AttachedToFinalUserMessageOnly) {
    std::vector<ReactRound> rounds(1);
    auto b = attach_screenshot(build_baseline_prompt(Strategy::react(4), "g", kMarkup, {1, {}, rounds}), "shot-7.png");
    for (std::size_t i = 0; i + 1 < b.messages.size(); ++i) EXPECT_FALSE(b.messages[i].image_ref);
    EXPECT_EQ(b.messages.back().image_ref, "shot-7.png");
}

TEST(Builders, PureFunctions) {
    const auto h = history_lines(2);
    const std::vector<std::string> steps = {"x"};
    EXPECT_EQ(build_planning_prompt("g", kMarkup, h, steps).flatten(), build_planning_prompt("g", kMarkup, h, steps).flatten());
}

TEST(Templates, ExportedDocsMatchEmbeddedText) {
    for (const auto& [name, text] : templates::all()) {
        const auto path = testing_support::source_path("docs/prompts/" + name + ".txt");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        EXPECT_EQ(testing_support::slurp(path), text) << name;
    }
}
