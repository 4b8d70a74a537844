#pragma once

#include <string>
#include <vector>

#include "dpot/plan_parser.hpp"

namespace dpot {

struct HistoryEntry {
    int step_idx = 0;
    std::string action_description;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

/// Execution history injected into every planning prompt. Grows by exactly
/// one entry per completed turn; existing entries are never rewritten.
struct ExecutionHistory {
    std::vector<HistoryEntry> entries;
    std::vector<std::string> steps_taken;

    friend bool operator==(const ExecutionHistory&, const ExecutionHistory&) = default;
};

/// `{"step_idx": 0, "action_description": "click [9]"}`
inline std::string render_history_entry(const HistoryEntry& e) {
    return "{\"step_idx\": " + std::to_string(e.step_idx) +
           ", \"action_description\": " + nlohmann::json(e.action_description).dump() + "}";
}

inline std::vector<std::string> render_history(const ExecutionHistory& h) {
    std::vector<std::string> lines;
    lines.reserve(h.entries.size());
    for (const auto& e : h.entries) lines.push_back(render_history_entry(e));
    return lines;
}

/// Description stored for a turn whose prediction could not be parsed.
inline constexpr std::string_view kUnparsedActionDescription = "invalid_action";

/// Appends the executed action (and the chosen step, when there is one).
/// `turn` must equal the number of entries already recorded.
inline ExecutionHistory update_history(ExecutionHistory h, int turn, const std::optional<Action>& action,
                                       const std::optional<ChosenStep>& step, const Screen& screen) {
    if (turn < 0 || static_cast<std::size_t>(turn) != h.entries.size())
        throw Error("update_history: turn " + std::to_string(turn) + " does not follow " +
                    std::to_string(h.entries.size()) + " recorded entries");
    h.entries.push_back({turn, action ? describe_action(*action, &screen) : std::string(kUnparsedActionDescription)});
    if (step) h.steps_taken.push_back(step->text);
    return h;
}

}  // namespace dpot
