#pragma once

// Screen-wise action matching, episode scores, subset aggregation and the
// per-action-type breakdown.

#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dpot/orchestrator.hpp"
#include "dpot/screen.hpp"

namespace dpot {

enum class MatchRule { TypeMatch, ClickDistance, ClickSameBox, ScrollDirection, TypeOnlyTypes, Unresolved, TypeMismatch, Unparsed };

inline std::string_view match_rule_name(MatchRule r) {
    switch (r) {
        case MatchRule::TypeMatch: return "type_match";
        case MatchRule::ClickDistance: return "click_distance";
        case MatchRule::ClickSameBox: return "click_same_box";
        case MatchRule::ScrollDirection: return "scroll_direction";
        case MatchRule::TypeOnlyTypes: return "type_only_types";
        case MatchRule::Unresolved: return "unresolved";
        case MatchRule::TypeMismatch: return "type_mismatch";
        case MatchRule::Unparsed: return "unparsed";
    }
    return "?";
}

struct MatchResult {
    bool verdict = false;
    MatchRule rule = MatchRule::TypeMismatch;
    std::optional<double> distance;  // only for ClickDistance
};

struct MatchOptions {
    double click_threshold = 0.14;
    bool strict_text = false;  // also require equal text for type actions
};

namespace detail {

struct ClickGeometry {
    BBox bbox;
    std::array<Point, 5> points;
};

inline std::optional<ClickGeometry> predicted_click_geometry(const Click& c, const Screen& screen) {
    if (const auto* p = std::get_if<Point>(&c.target)) {
        const BBox box{*p, *p};
        return ClickGeometry{box, element_points(box)};
    }
    const auto resolved = try_resolve_click_target(screen, std::get<int>(c.target));
    if (!resolved) return std::nullopt;
    return ClickGeometry{resolved->bbox, resolved->points};
}

inline Point gold_click_point(const GoldStep& gold) {
    if (gold.gesture) return gold.gesture->touch;
    const auto& c = std::get<Click>(gold.action);
    if (const auto* p = std::get_if<Point>(&c.target)) return *p;
    return resolve_click_target(gold.screen, std::get<int>(c.target)).bbox.center();
}

}  // namespace detail

/// Compares a prediction against the gold step on the gold step's screen.
/// An absent prediction (unparseable model output) never matches.
inline MatchResult match_action(const std::optional<Action>& pred, const GoldStep& gold, const MatchOptions& opts = {}) {
    if (!pred) return {false, MatchRule::Unparsed, std::nullopt};
    const ActionType pt = action_type(*pred);
    const ActionType gt = action_type(gold.action);
    if (pt != gt) return {false, MatchRule::TypeMismatch, std::nullopt};

    switch (pt) {
        case ActionType::Click: {
            const auto geo = detail::predicted_click_geometry(std::get<Click>(*pred), gold.screen);
            if (!geo) return {false, MatchRule::Unresolved, std::nullopt};
            const Point g = detail::gold_click_point(gold);
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : geo->points) best = std::min(best, distance(p, g));
            if (best <= opts.click_threshold) return {true, MatchRule::ClickDistance, best};
            if (geo->bbox.contains(g)) return {true, MatchRule::ClickSameBox, std::nullopt};
            for (const auto& el : gold.screen.elements) {
                if (!el.bbox.contains(g)) continue;
                for (const auto& p : geo->points)
                    if (el.bbox.contains(p)) return {true, MatchRule::ClickSameBox, std::nullopt};
            }
            return {false, MatchRule::ClickDistance, best};
        }
        case ActionType::Scroll: {
            const auto want = gold.gesture ? gesture_direction(*gold.gesture)
                                           : std::optional<ScrollDirection>(std::get<Scroll>(gold.action).direction);
            return {want && std::get<Scroll>(*pred).direction == *want, MatchRule::ScrollDirection, std::nullopt};
        }
        case ActionType::Type: {
            const bool ok = !opts.strict_text || std::get<TypeText>(*pred).text == std::get<TypeText>(gold.action).text;
            return {ok, MatchRule::TypeOnlyTypes, std::nullopt};
        }
        default: return {true, MatchRule::TypeMatch, std::nullopt};
    }
}

struct EpisodeScore {
    std::string episode_id;
    std::string subset;
    int correct = 0;
    int total = 0;
    double score = 0.0;  // percent
    std::vector<MatchResult> verdicts;  // one per gold step
};

/// Scores a trace against its episode. The denominator is always the full
/// episode length: steps the agent never reached count as misses, except that
/// after an early status_complete a gold status_complete step still counts.
inline EpisodeScore score_episode(const EpisodeTrace& trace, const Episode& e, const MatchOptions& opts = {}) {
    if (trace.episode_id != e.id) throw Error("score_episode: trace " + trace.episode_id + " does not belong to " + e.id);
    if (trace.turns.size() > e.steps.size())
        throw Error("score_episode: trace " + e.id + " has " + std::to_string(trace.turns.size()) + " turns for " +
                    std::to_string(e.steps.size()) + " gold steps");
    EpisodeScore s;
    s.episode_id = e.id;
    s.subset = e.subset;
    s.total = static_cast<int>(e.steps.size());
    const bool finished_early = trace.terminated_by == Termination::StatusComplete;
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        MatchResult r;
        if (i < trace.turns.size()) {
            if (trace.turns[i].turn != static_cast<int>(i))
                throw Error("score_episode: trace " + e.id + " turn " + std::to_string(i) + " is out of order");
            r = match_action(trace.turns[i].action, e.steps[i], opts);
        } else if (finished_early && std::holds_alternative<StatusComplete>(e.steps[i].action)) {
            r = {true, MatchRule::TypeMatch, std::nullopt};
        } else {
            r = {false, MatchRule::Unparsed, std::nullopt};
        }
        s.correct += r.verdict ? 1 : 0;
        s.verdicts.push_back(r);
    }
    s.score = s.total ? 100.0 * s.correct / s.total : 0.0;
    return s;
}

struct SubsetStat {
    double mean = 0.0;
    std::size_t episodes = 0;
};

struct SubsetReport {
    std::map<std::string, SubsetStat> subsets;  // alphabetical
    double overall = 0.0;
    bool weighted = false;
};

/// Unweighted mean of subset means.
inline double overall_from_subset_means(const std::vector<double>& means) {
    if (means.empty()) throw Error("aggregate: no subsets");
    return std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
}

/// Subset means of episode scores and their overall mean. With `weighted`
/// the overall is the mean over all episodes instead.
inline SubsetReport aggregate(const std::vector<EpisodeScore>& scores, bool weighted = false) {
    std::map<std::string, std::vector<double>> by_subset;
    for (const auto& s : scores) by_subset[s.subset].push_back(s.score);
    if (by_subset.empty()) throw Error("aggregate: no scores");
    SubsetReport r;
    r.weighted = weighted;
    std::vector<double> means;
    double sum = 0.0;
    for (const auto& [name, vals] : by_subset) {
        const double total = std::accumulate(vals.begin(), vals.end(), 0.0);
        r.subsets[name] = {total / static_cast<double>(vals.size()), vals.size()};
        means.push_back(r.subsets[name].mean);
        sum += total;
    }
    r.overall = weighted ? sum / static_cast<double>(scores.size()) : overall_from_subset_means(means);
    return r;
}

struct ActionBreakdownRow {
    ActionType type;
    std::size_t predicted = 0;
    std::size_t correct = 0;
    double predicted_ratio = 0.0;  // percent of evaluated turns
    double accuracy_ratio = 0.0;   // percent of evaluated turns
};

struct ActionBreakdown {
    std::vector<ActionBreakdownRow> rows;  // Click, Scroll, Type, Home, Back, Press, Complete
    std::size_t evaluated_turns = 0;
    std::size_t unparsed = 0;
};

/// Tallies predicted action types over every executed turn of every trace.
inline ActionBreakdown action_breakdown(const std::vector<EpisodeTrace>& traces, const std::vector<Episode>& episodes,
                                        const MatchOptions& opts = {}) {
    std::map<std::string, const Episode*> by_id;
    for (const auto& e : episodes) by_id[e.id] = &e;
    ActionBreakdown out;
    std::map<ActionType, ActionBreakdownRow> tally;
    for (auto t : kAllActionTypes) tally[t].type = t;
    for (const auto& trace : traces) {
        const auto it = by_id.find(trace.episode_id);
        if (it == by_id.end()) continue;
        const Episode& e = *it->second;
        for (const auto& rec : trace.turns) {
            if (rec.turn < 0 || static_cast<std::size_t>(rec.turn) >= e.steps.size()) continue;
            ++out.evaluated_turns;
            if (!rec.action) {
                ++out.unparsed;
                continue;
            }
            auto& row = tally[action_type(*rec.action)];
            ++row.predicted;
            if (match_action(rec.action, e.steps[static_cast<std::size_t>(rec.turn)], opts).verdict) ++row.correct;
        }
    }
    for (auto t : kAllActionTypes) {
        ActionBreakdownRow row = tally[t];
        if (out.evaluated_turns) {
            row.predicted_ratio = 100.0 * static_cast<double>(row.predicted) / static_cast<double>(out.evaluated_turns);
            row.accuracy_ratio = 100.0 * static_cast<double>(row.correct) / static_cast<double>(out.evaluated_turns);
        }
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace dpot
