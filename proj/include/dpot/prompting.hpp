#pragma once

// Prompt construction for every strategy.
//
// Templates are plain text with `{name}` slots filled in a single pass, so
// slot-like text inside a goal or screen is never re-expanded. The template
// constants are mirrored byte-for-byte under docs/prompts/.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpot/common.hpp"
#include "dpot/screen.hpp"
#include "dpot/tokens.hpp"

namespace dpot {

enum class Role { System, User, Assistant };

inline std::string_view role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

struct Message {
    Role role = Role::User;
    std::string text;
    std::optional<std::string> image_ref;

    friend bool operator==(const Message&, const Message&) = default;
};

struct Strategy {
    enum class Kind { NP, SP, DP, DPoT, DPoTWithReference, ReAct };

    Kind kind = Kind::DPoT;
    std::optional<int> history_len;  // ReAct only; nullopt = unbounded

    bool plans() const { return kind == Kind::SP || kind == Kind::DP || kind == Kind::DPoT || kind == Kind::DPoTWithReference; }
    bool uses_reference() const { return kind == Kind::DPoTWithReference; }

    /// "np", "sp", "dp", "dpot", "dpot-ref", "react:2", "react:inf".
    std::string name() const {
        switch (kind) {
            case Kind::NP: return "np";
            case Kind::SP: return "sp";
            case Kind::DP: return "dp";
            case Kind::DPoT: return "dpot";
            case Kind::DPoTWithReference: return "dpot-ref";
            case Kind::ReAct: return "react:" + (history_len ? std::to_string(*history_len) : std::string("inf"));
        }
        return "?";
    }

    static Strategy react(std::optional<int> history_len) { return {Kind::ReAct, history_len}; }

    /// Accepts the forms produced by name() plus a bare "react" (history from the argument).
    static Strategy parse(std::string_view text, std::optional<int> react_history = 4) {
        const std::string t = util::to_lower(util::trim(text));
        if (t == "np") return {Kind::NP, {}};
        if (t == "sp") return {Kind::SP, {}};
        if (t == "dp") return {Kind::DP, {}};
        if (t == "dpot") return {Kind::DPoT, {}};
        if (t == "dpot-ref") return {Kind::DPoTWithReference, {}};
        if (t == "react") {
            if (react_history && *react_history < 0) throw Error("react history length must be >= 0");
            return react(react_history);
        }
        if (t.rfind("react:", 0) == 0) {
            const std::string n = t.substr(6);
            if (n == "inf") return react(std::nullopt);
            if (!n.empty() && n.size() < 6 && std::all_of(n.begin(), n.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
                return react(std::stoi(n));
        }
        throw Error("unknown strategy \"" + std::string(text) + "\" (expected np, sp, dp, dpot, dpot-ref or react)");
    }

    friend bool operator==(const Strategy&, const Strategy&) = default;
};

struct PromptBundle {
    std::vector<Message> messages;
    Strategy strategy;
    int turn = 0;

    std::int64_t estimated_tokens() const {
        std::int64_t n = 0;
        for (const auto& m : messages) n += estimate_tokens(m.text);
        return n;
    }

    /// Concatenated text of all messages, role-tagged.
    std::string flatten() const {
        std::string out;
        for (const auto& m : messages) {
            out += "[";
            out += role_name(m.role);
            out += "]\n";
            out += m.text;
            out += "\n";
        }
        return out;
    }
};

/// Attaches a screenshot handle to the final user message (multimodal backends only).
inline PromptBundle attach_screenshot(PromptBundle bundle, const std::optional<std::string>& image_ref) {
    if (!image_ref) return bundle;
    for (auto it = bundle.messages.rbegin(); it != bundle.messages.rend(); ++it) {
        if (it->role == Role::User) {
            it->image_ref = image_ref;
            break;
        }
    }
    return bundle;
}

struct ReferenceEntry {
    std::string goal;
    std::string initial_caption;
    std::vector<std::string> action_descriptions;  // rendered history lines

    friend bool operator==(const ReferenceEntry&, const ReferenceEntry&) = default;
};

struct ReferenceBlock {
    std::vector<ReferenceEntry> entries;
};

/// One completed ReAct round: what was observed and the raw model reply.
struct ReactRound {
    std::string observation;  // rendered screen markup
    std::string response;     // verbatim model output (thought + action)
};

struct PromptOptions {
    /// Cap on the estimated prompt size. Oldest history lines are dropped first,
    /// then oldest steps; the goal and the current screen are always kept.
    std::optional<std::int64_t> max_prompt_tokens;
};

namespace templates {

inline constexpr std::string_view kPlanningFraming =
    "Imagine that you are a robot operating a mobile. Like how humans operate the mobile, you can click on the "
    "screen, type some text, go home, go back to the last screen, scroll up, down, left and right, or mark the "
    "status as complete. Given a goal and a mobiel screen, you need to make a plan to achieve your goals based on "
    "the current screen, and choose the steps that should be achieved on the current screen from the plan you have "
    "made. Since achieving this goal is a **continuous process**, you will be given the **previous steps and "
    "actions** that have been performed, so please pay attention to this information. There may be multiple ways "
    "to achieve your goals, but what you need to do is create the plan that best suits your current situation based "
    "on the current screen input.";

inline constexpr std::string_view kPlanningInstruction =
    "Please formulate an operational guide for future operations for solving the goal. The guide includes:\n"
    "1. Plan: A **multi-step future** plan **(start from current screen, DON'T include previous steps)**; steps "
    "indexed by numbers.\n"
    "2. Step: Based on the current screen and Previous Steps, provide the **immediate** step that needs to be taken "
    "from the Plan.\n"
    "\"**Output Format:** A JSON dictionary strictly following the format: \"{'plan': '...<Your Plan Here>', "
    "'step': '...<Your Step Here>'} \"If the goal has already been implemented, no more planning is required, "
    "Provide {'plan': '1. Mark the task as complete', 'step': 'Mark the task as complet'}.\n"
    "**Please do not output any content other than the JSON format.**";

inline constexpr std::string_view kHistorySection =
    "Here are previous actions: (format: action → action description)\n"
    "Previous Actions:\n"
    "{previous_actions}\n"
    "And the previous steps:\n"
    "Previous Steps:\n"
    "{previous_steps}";

inline const std::string kPlanning = std::string(kPlanningFraming) +
                                     "\n\n"
                                     "**Your ultimate goal is: {goal}.**\n"
                                     "The current on-screen input is:\n"
                                     "{screen}\n" +
                                     std::string(kHistorySection) + "\n\n" + std::string(kPlanningInstruction);

inline const std::string kPlanningWithReference =
    std::string(kPlanningFraming) +
    "\n"
    "**Your ultimate goal is: {goal}.**\n"
    "I also give you {reference_count} similar {reference_noun} as a reference, here are their goal, the initial "
    "caption of mobile screen, and all the execution actions to complete goal:\n"
    "{references}\n"
    "The current on-screen input is:\n"
    "{screen}\n\n" +
    std::string(kHistorySection) + "\n\n" + std::string(kPlanningInstruction);

inline constexpr std::string_view kReferenceEntry =
    "Goal: {ref_goal}\n"
    "Caption: {ref_caption}\n"
    "Execution history:\n"
    "{ref_history}\n";

inline constexpr std::string_view kActionFormat =
    "Output exactly one JSON object with the key \"action_type\", whose value is one of \"click\", \"scroll\", "
    "\"type\", \"navigate_home\", \"navigate_back\", \"press_enter\", \"status_complete\".\n"
    "- \"click\" also requires \"idx\": the id of the target element on the screen.\n"
    "- \"scroll\" also requires \"direction\": one of \"up\", \"down\", \"left\", \"right\".\n"
    "- \"type\" also requires \"text\": the text to enter.\n"
    "Example: {\"action_type\": \"click\", \"idx\": 4}";

inline const std::string kGrounding =
    "You are operating a mobile phone. Convert the step below into exactly one executable action on the current "
    "screen.\n"
    "The task goal is: {goal}\n"
    "The step to execute is: {step}\n"
    "The current on-screen input is:\n"
    "{screen}\n\n" +
    std::string(kActionFormat) +
    "\n"
    "**Please do not output any content other than the JSON format.**";

inline constexpr std::string_view kActionFraming =
    "Imagine that you are a robot operating a mobile. Like how humans operate the mobile, you can click on the "
    "screen, type some text, go home, go back to the last screen, scroll up, down, left and right, or mark the "
    "status as complete.";

inline const std::string kNoPlanning = std::string(kActionFraming) +
                                       " Given a goal and a mobile screen, you need to choose the action that "
                                       "should be performed on the current screen.\n\n"
                                       "**Your ultimate goal is: {goal}.**\n"
                                       "The current on-screen input is:\n"
                                       "{screen}\n\n"
                                       "Based on the current screen, predict the next action directly.\n" +
                                       std::string(kActionFormat) +
                                       "\n"
                                       "**Please do not output any content other than the JSON format.**";

inline const std::string kGivenPlan =
    std::string(kActionFraming) +
    " Given a goal, a plan and a mobile screen, you need to choose the step of the plan that should be achieved on "
    "the current screen.\n\n"
    "**Your ultimate goal is: {goal}.**\n"
    "Here is the plan for the task:\n"
    "{plan}\n"
    "The current on-screen input is:\n"
    "{screen}\n"
    "{history_block}\n"
    "Based on the current screen and the plan, provide the **immediate** step that needs to be taken from the "
    "Plan.\n"
    "\"**Output Format:** A JSON dictionary strictly following the format: \"{'step': '...<Your Step Here>'} \"If "
    "the goal has already been implemented, Provide {'step': 'Mark the task as complete'}.\n"
    "**Please do not output any content other than the JSON format.**";

inline const std::string kDynamicPlanOnly =
    std::string(kActionFraming) +
    " Given a goal and a mobile screen, you need to make a plan to achieve your goal based on the current "
    "screen.\n\n"
    "**Your ultimate goal is: {goal}.**\n"
    "The current on-screen input is:\n"
    "{screen}\n\n"
    "Please formulate a **multi-step future** plan **(start from current screen)**; steps indexed by numbers. The "
    "first step will be executed on the current screen.\n"
    "\"**Output Format:** A JSON dictionary strictly following the format: \"{'plan': '...<Your Plan Here>'} \"If "
    "the goal has already been implemented, Provide {'plan': '1. Mark the task as complete'}.\n"
    "**Please do not output any content other than the JSON format.**";

inline const std::string kReactSystem =
    std::string(kActionFraming) +
    " You will complete a task over several turns. At every turn you receive the current screen; think about the "
    "situation first, then act.\n\n"
    "**Your ultimate goal is: {goal}.**\n\n"
    "Reply in exactly this format:\n"
    "Thought: <your reasoning about the current screen and progress>\n"
    "Action: <one JSON object>\n\n" +
    std::string(kActionFormat);

inline constexpr std::string_view kReactObservation =
    "The current on-screen input is:\n"
    "{screen}";

/// Every template by name, as exported under docs/prompts/<name>.txt.
inline std::map<std::string, std::string> all() {
    return {
        {"planning", kPlanning},
        {"planning_with_reference", kPlanningWithReference},
        {"reference_entry", std::string(kReferenceEntry)},
        {"grounding", kGrounding},
        {"no_planning", kNoPlanning},
        {"given_plan", kGivenPlan},
        {"dynamic_plan_only", kDynamicPlanOnly},
        {"react_system", kReactSystem},
        {"react_observation", std::string(kReactObservation)},
    };
}

}  // namespace templates

/// Single-pass slot substitution: `{name}` is replaced when `name` is a key of
/// `slots`; every other brace sequence is copied through.
inline std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tpl.size() + 256);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            const auto close = tpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string key(tpl.substr(i + 1, close - i - 1));
                if (auto it = slots.find(key); it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tpl[i++];
    }
    return out;
}

namespace detail {

inline std::string lines_or_none(std::span<const std::string> lines) {
    if (lines.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

inline std::string numbered_steps(std::span<const std::string> steps) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < steps.size(); ++i) lines.push_back("Step " + std::to_string(i + 1) + ". " + steps[i]);
    return lines_or_none(lines);
}

inline std::string count_word(std::size_t n) {
    static constexpr const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                            "six",  "seven", "eight", "nine",  "ten"};
    return n <= 10 ? words[n] : std::to_string(n);
}

inline PromptBundle single_user(std::string text, Strategy strategy, int turn) {
    PromptBundle b;
    b.messages.push_back({Role::User, std::move(text), std::nullopt});
    b.strategy = strategy;
    b.turn = turn;
    return b;
}

// Applies the token cap by dropping the oldest history lines, then the oldest steps.
template <class Render>
std::string with_budget(std::span<const std::string> history, std::span<const std::string> steps,
                        const PromptOptions& opts, Render render) {
    std::string text = render(history, steps);
    if (!opts.max_prompt_tokens) return text;
    while (estimate_tokens(text) > *opts.max_prompt_tokens && (!history.empty() || !steps.empty())) {
        if (!history.empty())
            history = history.subspan(1);
        else
            steps = steps.subspan(1);
        text = render(history, steps);
    }
    return text;
}

}  // namespace detail

inline PromptBundle build_planning_prompt(std::string_view goal, const ScreenMarkup& markup,
                                          std::span<const std::string> history_lines,
                                          std::span<const std::string> prev_steps, const PromptOptions& opts = {},
                                          int turn = 0, Strategy strategy = {Strategy::Kind::DPoT, {}}) {
    if (util::trim(goal).empty()) throw Error("build_planning_prompt: goal is empty");
    const std::string screen = markup.render();
    auto text = detail::with_budget(history_lines, prev_steps, opts, [&](auto h, auto s) {
        return fill_template(templates::kPlanning, {{"goal", std::string(goal)},
                                                    {"screen", screen},
                                                    {"previous_actions", detail::lines_or_none(h)},
                                                    {"previous_steps", detail::numbered_steps(s)}});
    });
    return detail::single_user(std::move(text), strategy, turn);
}

inline std::string render_reference_entry(const ReferenceEntry& e) {
    return fill_template(templates::kReferenceEntry,
                         {{"ref_goal", e.goal},
                          {"ref_caption", e.initial_caption.empty() ? "(no caption)" : e.initial_caption},
                          {"ref_history", detail::lines_or_none(e.action_descriptions)}});
}

inline PromptBundle build_planning_prompt_with_reference(std::string_view goal, const ScreenMarkup& markup,
                                                         std::span<const std::string> history_lines,
                                                         std::span<const std::string> prev_steps,
                                                         const ReferenceBlock& refs, const PromptOptions& opts = {},
                                                         int turn = 0) {
    if (util::trim(goal).empty()) throw Error("build_planning_prompt_with_reference: goal is empty");
    if (refs.entries.empty()) throw Error("build_planning_prompt_with_reference: no references given");
    std::string references;
    for (std::size_t i = 0; i < refs.entries.size(); ++i) {
        if (i) references += '\n';
        references += render_reference_entry(refs.entries[i]);
    }
    const std::string screen = markup.render();
    const std::size_t n = refs.entries.size();
    auto text = detail::with_budget(history_lines, prev_steps, opts, [&](auto h, auto s) {
        return fill_template(templates::kPlanningWithReference,
                             {{"goal", std::string(goal)},
                              {"reference_count", detail::count_word(n)},
                              {"reference_noun", n == 1 ? "example" : "examples"},
                              {"references", references},
                              {"screen", screen},
                              {"previous_actions", detail::lines_or_none(h)},
                              {"previous_steps", detail::numbered_steps(s)}});
    });
    return detail::single_user(std::move(text), {Strategy::Kind::DPoTWithReference, {}}, turn);
}

inline PromptBundle build_grounding_prompt(std::string_view step, const ScreenMarkup& markup, std::string_view goal,
                                           int turn = 0, Strategy strategy = {Strategy::Kind::DPoT, {}}) {
    if (util::trim(step).empty()) throw Error("build_grounding_prompt: step is empty");
    return detail::single_user(fill_template(templates::kGrounding, {{"goal", std::string(goal)},
                                                                     {"step", std::string(step)},
                                                                     {"screen", markup.render()}}),
                               strategy, turn);
}

/// Step-selection prompt over a supplied plan. With `history` the execution
/// history sections are included (external plans); without, they are omitted
/// (static planning).
inline PromptBundle build_given_plan_prompt(std::string_view goal, const ScreenMarkup& markup, std::string_view plan,
                                            std::optional<std::pair<std::span<const std::string>, std::span<const std::string>>> history,
                                            Strategy strategy, int turn, const PromptOptions& opts = {}) {
    const std::string screen = markup.render();
    auto render = [&](std::span<const std::string> h, std::span<const std::string> s) {
        std::string block;
        if (history)
            block = "\n" + fill_template(templates::kHistorySection, {{"previous_actions", detail::lines_or_none(h)},
                                                                      {"previous_steps", detail::numbered_steps(s)}}) +
                    "\n";
        return fill_template(templates::kGivenPlan, {{"goal", std::string(goal)},
                                                     {"plan", std::string(plan)},
                                                     {"screen", screen},
                                                     {"history_block", block}});
    };
    std::string text = history ? detail::with_budget(history->first, history->second, opts, render)
                               : render({}, {});
    return detail::single_user(std::move(text), strategy, turn);
}

struct BaselineContext {
    int turn = 0;
    std::optional<std::string> frozen_plan;  // SP, turns after the first
    std::span<const ReactRound> react_rounds;  // ReAct: every completed round, oldest first
};

/// Prompts for the comparison strategies (NP, SP, DP, ReAct).
inline PromptBundle build_baseline_prompt(const Strategy& strategy, std::string_view goal, const ScreenMarkup& markup,
                                          const BaselineContext& ctx) {
    if (util::trim(goal).empty()) throw Error("build_baseline_prompt: goal is empty");
    const std::string g(goal);
    switch (strategy.kind) {
        case Strategy::Kind::NP:
            return detail::single_user(fill_template(templates::kNoPlanning, {{"goal", g}, {"screen", markup.render()}}),
                                       strategy, ctx.turn);
        case Strategy::Kind::DP:
            return detail::single_user(
                fill_template(templates::kDynamicPlanOnly, {{"goal", g}, {"screen", markup.render()}}), strategy,
                ctx.turn);
        case Strategy::Kind::SP:
            if (ctx.turn == 0 && !ctx.frozen_plan) return build_planning_prompt(goal, markup, {}, {}, {}, 0, strategy);
            if (!ctx.frozen_plan) throw Error("static planning after turn 0 requires the frozen plan");
            return build_given_plan_prompt(goal, markup, *ctx.frozen_plan, std::nullopt, strategy, ctx.turn);
        case Strategy::Kind::ReAct: {
            if (strategy.history_len && *strategy.history_len < 0) throw Error("react history length must be >= 0");
            if (ctx.react_rounds.size() != static_cast<std::size_t>(ctx.turn))
                throw Error("react prompt at turn " + std::to_string(ctx.turn) + " needs " + std::to_string(ctx.turn) +
                            " prior rounds, got " + std::to_string(ctx.react_rounds.size()));
            PromptBundle b;
            b.strategy = strategy;
            b.turn = ctx.turn;
            b.messages.push_back({Role::System, fill_template(templates::kReactSystem, {{"goal", g}}), std::nullopt});
            std::size_t keep = ctx.react_rounds.size();
            if (strategy.history_len) keep = std::min(keep, static_cast<std::size_t>(*strategy.history_len));
            for (const auto& round : ctx.react_rounds.subspan(ctx.react_rounds.size() - keep)) {
                b.messages.push_back({Role::User, fill_template(templates::kReactObservation, {{"screen", round.observation}}),
                                      std::nullopt});
                b.messages.push_back({Role::Assistant, round.response, std::nullopt});
            }
            b.messages.push_back(
                {Role::User, fill_template(templates::kReactObservation, {{"screen", markup.render()}}), std::nullopt});
            return b;
        }
        case Strategy::Kind::DPoT:
        case Strategy::Kind::DPoTWithReference: break;
    }
    throw Error("build_baseline_prompt: " + strategy.name() + " is not a baseline strategy");
}

}  // namespace dpot
