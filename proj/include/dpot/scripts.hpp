#pragma once

// Canned model responses for the scripted backend, external plan files, and
// generators for scripts that follow (or deliberately miss) the gold actions.
//
// Scripts file, one object per line:   {"episode_id": str, "responses": [str, ...]}
// Plan file, one object per line:      {"episode_id": str, "turn": int, "plan": str, "step": str?}

#include <filesystem>
#include <fstream>
#include <map>

#include "dpot/dataset.hpp"
#include "dpot/orchestrator.hpp"

namespace dpot {

using ScriptBook = std::map<std::string, std::vector<std::string>>;

inline ScriptBook parse_scripts(std::istream& in) {
    ScriptBook book;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (util::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const std::string id = j.at("episode_id").get<std::string>();
            if (book.count(id)) throw Error("duplicate episode_id " + id);
            book[id] = j.at("responses").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error("scripts line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("scripts line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return book;
}

inline ScriptBook load_scripts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read scripts " + path.string());
    return parse_scripts(in);
}

inline std::string serialize_scripts(const ScriptBook& book) {
    std::string out;
    for (const auto& [id, responses] : book)
        out += Json{{"episode_id", id}, {"responses", responses}}.dump() + "\n";
    return out;
}

inline void save_scripts(const std::filesystem::path& path, const ScriptBook& book) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write scripts " + path.string());
    out << serialize_scripts(book);
}

inline ExternalPlans parse_plan_file(std::istream& in) {
    ExternalPlans plans;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (util::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ExternalPlan p;
            p.plan = j.at("plan").get<std::string>();
            if (util::trim(p.plan).empty()) throw Error("plan is empty");
            if (j.contains("step") && !j["step"].is_null()) p.step = j["step"].get<std::string>();
            const auto key = std::make_pair(j.at("episode_id").get<std::string>(), j.at("turn").get<int>());
            if (key.second < 0) throw Error("turn must be non-negative");
            if (!plans.emplace(key, std::move(p)).second)
                throw Error("duplicate plan for " + key.first + " turn " + std::to_string(key.second));
        } catch (const nlohmann::json::exception& e) {
            throw Error("plan file line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("plan file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return plans;
}

inline ExternalPlans load_plan_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read plan file " + path.string());
    return parse_plan_file(in);
}

// ---------------------------------------------------------------------------
// Script generators

/// A wrong action of a different type than `gold` (never status_complete).
inline Action contrary_action(const Action& gold) {
    switch (action_type(gold)) {
        case ActionType::Click: return Scroll{ScrollDirection::Up};
        case ActionType::Scroll: return Navigate{NavDestination::Back};
        case ActionType::Type: return Navigate{NavDestination::Home};
        case ActionType::NavigateHome: return Navigate{NavDestination::Back};
        case ActionType::NavigateBack: return Navigate{NavDestination::Home};
        case ActionType::PressEnter: return Navigate{NavDestination::Home};
        case ActionType::StatusComplete: return Navigate{NavDestination::Back};
    }
    return PressEnter{};
}

namespace detail {

/// Clicks given by point become the element holding the point, else the nearest center.
inline Action as_idx_action(const Action& a, const Screen& screen) {
    const auto* c = std::get_if<Click>(&a);
    if (!c || std::holds_alternative<int>(c->target) || screen.elements.empty()) return a;
    const Point p = std::get<Point>(c->target);
    const UiElement* best = nullptr;
    double best_d = 1e9;
    for (const auto& el : screen.elements) {
        if (el.bbox.contains(p)) return Click{el.idx};
        const double d = distance(el.bbox.center(), p);
        if (d < best_d) best_d = d, best = &el;
    }
    return Click{best->idx};
}

/// A step description that the description grammar grounds back to `a`.
inline std::string grammar_step(const Action& a) {
    if (const auto* c = std::get_if<Click>(&a); c && std::holds_alternative<int>(c->target))
        return "click [" + std::to_string(std::get<int>(c->target)) + "]";
    if (const auto* t = std::get_if<TypeText>(&a)) return "type [" + t->text + "]";
    return describe_action(a);
}

}  // namespace detail

/// Responses a model would give if it always proposed `actions[i]` at turn i.
/// `actions` must have one entry per gold step.
inline std::vector<std::string> script_for_actions(const Episode& e, const std::vector<Action>& actions,
                                                   const Strategy& strategy, Grounding grounding) {
    if (actions.size() != e.steps.size()) throw Error("script_for_actions: one action per step required");
    std::vector<Action> acts;
    for (std::size_t i = 0; i < actions.size(); ++i) acts.push_back(detail::as_idx_action(actions[i], e.steps[i].screen));
    std::vector<std::string> steps;
    for (const auto& a : acts) steps.push_back(detail::grammar_step(a));
    auto plan_from = [&](std::size_t i) {
        std::string plan;
        for (std::size_t k = i; k < steps.size(); ++k) {
            if (k > i) plan += ' ';
            plan += std::to_string(k - i + 1) + ". " + steps[k];
        }
        return plan;
    };

    std::vector<std::string> out;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        const std::string action_json = action_to_json(acts[i]).dump();
        bool grounded = true;
        switch (strategy.kind) {
            case Strategy::Kind::NP: out.push_back(action_json); grounded = false; break;
            case Strategy::Kind::ReAct:
                out.push_back("Thought: next I should " + steps[i] + ".\nAction: " + action_json);
                grounded = false;
                break;
            case Strategy::Kind::DP: out.push_back(nlohmann::json{{"plan", plan_from(i)}}.dump()); break;
            case Strategy::Kind::SP:
                out.push_back(i == 0 ? nlohmann::json{{"plan", plan_from(0)}, {"step", steps[0]}}.dump()
                                     : nlohmann::json{{"step", steps[i]}}.dump());
                break;
            case Strategy::Kind::DPoT:
            case Strategy::Kind::DPoTWithReference:
                out.push_back(nlohmann::json{{"plan", plan_from(i)}, {"step", steps[i]}}.dump());
                break;
        }
        if (grounded && grounding == Grounding::ModelCall) out.push_back(action_json);
        if (std::holds_alternative<StatusComplete>(acts[i])) break;
    }
    return out;
}

inline std::vector<std::string> oracle_script(const Episode& e, const Strategy& strategy, Grounding grounding) {
    std::vector<Action> gold;
    for (const auto& s : e.steps) gold.push_back(s.action);
    return script_for_actions(e, gold, strategy, grounding);
}

inline std::vector<std::string> wrong_script(const Episode& e, const Strategy& strategy, Grounding grounding) {
    std::vector<Action> wrong;
    for (const auto& s : e.steps) wrong.push_back(contrary_action(s.action));
    return script_for_actions(e, wrong, strategy, grounding);
}

inline ScriptBook script_book(const std::vector<Episode>& episodes, const Strategy& strategy, Grounding grounding,
                              bool wrong = false) {
    ScriptBook book;
    for (const auto& e : episodes)
        book[e.id] = wrong ? wrong_script(e, strategy, grounding) : oracle_script(e, strategy, grounding);
    return book;
}

/// Backend factory serving each episode its own script queue.
inline BackendFactory scripted_factory(std::shared_ptr<const ScriptBook> book) {
    return [book = std::move(book)](const Episode& e) -> std::shared_ptr<ChatBackend> {
        const auto it = book->find(e.id);
        if (it == book->end()) return std::make_shared<ScriptedBackend>();
        return std::make_shared<ScriptedBackend>(it->second);
    };
}

}  // namespace dpot
