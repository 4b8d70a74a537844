#pragma once

// Episode/screen/action data model and structural validation.
//
// Coordinates are normalized to the unit square: x is the fraction of screen
// width, y the fraction of screen height, with y growing downwards.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpot/common.hpp"

namespace dpot {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline bool in_unit_square(const Point& p) {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
}

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct BBox {
    Point min;
    Point max;

    bool contains(const Point& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
    Point center() const { return {(min.x + max.x) / 2.0, (min.y + max.y) / 2.0}; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

enum class ElementKind { Text, Icon };

struct UiElement {
    int idx = 0;
    ElementKind kind = ElementKind::Text;
    std::string icon_class;  // only meaningful for icons, e.g. "ICON_CLOUD"
    std::string text;        // OCR text, empty for icons
    BBox bbox;

    friend bool operator==(const UiElement&, const UiElement&) = default;
};

struct Screen {
    std::vector<UiElement> elements;
    std::optional<std::string> caption;
    std::optional<std::string> image_ref;

    const UiElement* find(int idx) const {
        if (idx < 0 || static_cast<std::size_t>(idx) >= elements.size()) return nullptr;
        return &elements[static_cast<std::size_t>(idx)];
    }

    friend bool operator==(const Screen&, const Screen&) = default;
};

struct GoldGesture {
    Point touch;
    Point lift;

    friend bool operator==(const GoldGesture&, const GoldGesture&) = default;
};

// ---------------------------------------------------------------------------
// Actions

enum class ScrollDirection { Up, Down, Left, Right };
enum class NavDestination { Home, Back };

struct Click {
    std::variant<int, Point> target;
    friend bool operator==(const Click&, const Click&) = default;
};
struct Scroll {
    ScrollDirection direction = ScrollDirection::Up;
    friend bool operator==(const Scroll&, const Scroll&) = default;
};
struct TypeText {
    std::string text;
    friend bool operator==(const TypeText&, const TypeText&) = default;
};
struct Navigate {
    NavDestination dest = NavDestination::Home;
    friend bool operator==(const Navigate&, const Navigate&) = default;
};
struct PressEnter {
    friend bool operator==(const PressEnter&, const PressEnter&) = default;
};
struct StatusComplete {
    friend bool operator==(const StatusComplete&, const StatusComplete&) = default;
};

using Action = std::variant<Click, Scroll, TypeText, Navigate, PressEnter, StatusComplete>;

/// Flat action kind. Navigate splits into Home/Back because the two are
/// scored and tallied as distinct types. Enumerator order is the canonical
/// table order used by reports.
enum class ActionType { Click, Scroll, Type, NavigateHome, NavigateBack, PressEnter, StatusComplete };

inline constexpr ActionType kAllActionTypes[] = {
    ActionType::Click,        ActionType::Scroll,     ActionType::Type,
    ActionType::NavigateHome, ActionType::NavigateBack, ActionType::PressEnter,
    ActionType::StatusComplete,
};

inline ActionType action_type(const Action& a) {
    struct Visitor {
        ActionType operator()(const Click&) const { return ActionType::Click; }
        ActionType operator()(const Scroll&) const { return ActionType::Scroll; }
        ActionType operator()(const TypeText&) const { return ActionType::Type; }
        ActionType operator()(const Navigate& n) const {
            return n.dest == NavDestination::Home ? ActionType::NavigateHome
                                                  : ActionType::NavigateBack;
        }
        ActionType operator()(const PressEnter&) const { return ActionType::PressEnter; }
        ActionType operator()(const StatusComplete&) const { return ActionType::StatusComplete; }
    };
    return std::visit(Visitor{}, a);
}

/// Wire name of an action type ("click", "navigate_home", ...).
inline std::string_view action_type_name(ActionType t) {
    switch (t) {
        case ActionType::Click: return "click";
        case ActionType::Scroll: return "scroll";
        case ActionType::Type: return "type";
        case ActionType::NavigateHome: return "navigate_home";
        case ActionType::NavigateBack: return "navigate_back";
        case ActionType::PressEnter: return "press_enter";
        case ActionType::StatusComplete: return "status_complete";
    }
    return "?";
}

/// Short column label used in report tables.
inline std::string_view action_type_label(ActionType t) {
    switch (t) {
        case ActionType::Click: return "Click";
        case ActionType::Scroll: return "Scroll";
        case ActionType::Type: return "Type";
        case ActionType::NavigateHome: return "Home";
        case ActionType::NavigateBack: return "Back";
        case ActionType::PressEnter: return "Press";
        case ActionType::StatusComplete: return "Complete";
    }
    return "?";
}

inline std::optional<ActionType> action_type_from_name(std::string_view name) {
    for (auto t : kAllActionTypes)
        if (action_type_name(t) == name) return t;
    return std::nullopt;
}

inline std::string_view direction_name(ScrollDirection d) {
    switch (d) {
        case ScrollDirection::Up: return "up";
        case ScrollDirection::Down: return "down";
        case ScrollDirection::Left: return "left";
        case ScrollDirection::Right: return "right";
    }
    return "?";
}

inline std::optional<ScrollDirection> direction_from_name(std::string_view name) {
    const std::string lower = util::to_lower(util::trim(name));
    if (lower == "up") return ScrollDirection::Up;
    if (lower == "down") return ScrollDirection::Down;
    if (lower == "left") return ScrollDirection::Left;
    if (lower == "right") return ScrollDirection::Right;
    return std::nullopt;
}

/// Direction named by a swipe gesture: the dominant axis of (lift - touch),
/// vertical on ties. A finger moving towards the top of the screen is Up,
/// towards the left edge is Left. A gesture with no displacement names none.
inline std::optional<ScrollDirection> gesture_direction(const GoldGesture& g) {
    const double dx = g.lift.x - g.touch.x;
    const double dy = g.lift.y - g.touch.y;
    if (dx == 0.0 && dy == 0.0) return std::nullopt;
    if (std::abs(dy) >= std::abs(dx)) return dy < 0.0 ? ScrollDirection::Up : ScrollDirection::Down;
    return dx < 0.0 ? ScrollDirection::Left : ScrollDirection::Right;
}

// ---------------------------------------------------------------------------
// Episodes

struct GoldStep {
    Screen screen;
    Action action;
    std::optional<GoldGesture> gesture;

    friend bool operator==(const GoldStep&, const GoldStep&) = default;
};

struct Episode {
    std::string id;
    std::string subset;
    std::string goal;
    std::vector<GoldStep> steps;

    friend bool operator==(const Episode&, const Episode&) = default;
};

struct DatasetManifest {
    std::string source;
    std::string loaded_at;  // ISO-8601 UTC; empty for generated datasets
    std::map<std::string, std::size_t> subset_counts;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
    std::vector<Episode> episodes;
    DatasetManifest manifest;

    const Episode* find(std::string_view id) const {
        for (const auto& e : episodes)
            if (e.id == id) return &e;
        return nullptr;
    }
};

inline std::map<std::string, std::size_t> count_subsets(const std::vector<Episode>& episodes) {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : episodes) ++counts[e.subset];
    return counts;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::optional<std::size_t> step;  // absent for episode-level findings
    std::string field;                // dotted path, e.g. "steps[2].elements[0].bbox"
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline std::string fmt_point(const Point& p) {
    return "(" + util::fixed(p.x, 4) + ", " + util::fixed(p.y, 4) + ")";
}

inline void check_point(std::vector<Violation>& out, std::optional<std::size_t> step,
                        const std::string& field, const Point& p) {
    if (!in_unit_square(p))
        out.push_back({step, field, "point " + fmt_point(p) + " outside the unit square"});
}

}  // namespace detail

/// Checks every structural invariant of an episode. The result is ordered by
/// step index (episode-level findings first) and is empty for a valid episode.
inline std::vector<Violation> validate_episode(const Episode& e) {
    std::vector<Violation> out;
    if (e.id.empty()) out.push_back({std::nullopt, "id", "episode id is empty"});
    if (e.goal.empty()) out.push_back({std::nullopt, "goal", "goal is empty"});
    if (e.steps.empty()) out.push_back({std::nullopt, "steps", "episode has no steps"});

    for (std::size_t s = 0; s < e.steps.size(); ++s) {
        const GoldStep& step = e.steps[s];
        const std::string prefix = "steps[" + std::to_string(s) + "]";

        for (std::size_t i = 0; i < step.screen.elements.size(); ++i) {
            const UiElement& el = step.screen.elements[i];
            const std::string ep = prefix + ".elements[" + std::to_string(i) + "]";
            if (el.idx != static_cast<int>(i))
                out.push_back({s, ep + ".idx",
                               "idx " + std::to_string(el.idx) + " does not match position " +
                                   std::to_string(i)});
            if (el.kind == ElementKind::Text && el.text.empty())
                out.push_back({s, ep + ".text", "text element has empty text"});
            detail::check_point(out, s, ep + ".bbox.min", el.bbox.min);
            detail::check_point(out, s, ep + ".bbox.max", el.bbox.max);
            if (el.bbox.min.x > el.bbox.max.x || el.bbox.min.y > el.bbox.max.y)
                out.push_back({s, ep + ".bbox", "bbox min exceeds max"});
        }

        const ActionType type = action_type(step.action);
        const bool needs_gesture = type == ActionType::Click || type == ActionType::Scroll;
        if (needs_gesture && !step.gesture)
            out.push_back({s, prefix + ".gold", "click/scroll gold step lacks a gesture"});
        if (!needs_gesture && step.gesture)
            out.push_back({s, prefix + ".gold",
                           "gesture present on a " + std::string(action_type_name(type)) +
                               " gold step"});

        if (step.gesture) {
            detail::check_point(out, s, prefix + ".gold.touch", step.gesture->touch);
            detail::check_point(out, s, prefix + ".gold.lift", step.gesture->lift);
        }

        if (const auto* click = std::get_if<Click>(&step.action)) {
            if (const auto* idx = std::get_if<int>(&click->target)) {
                if (!step.screen.find(*idx))
                    out.push_back({s, prefix + ".gold.idx",
                                   "click idx " + std::to_string(*idx) + " not on screen"});
            } else {
                detail::check_point(out, s, prefix + ".gold.point", std::get<Point>(click->target));
            }
        }

        if (const auto* scroll = std::get_if<Scroll>(&step.action); scroll && step.gesture) {
            const auto dominant = gesture_direction(*step.gesture);
            if (!dominant)
                out.push_back({s, prefix + ".gold", "scroll gesture has no displacement"});
            else if (*dominant != scroll->direction)
                out.push_back({s, prefix + ".gold.direction",
                               "recorded direction " + std::string(direction_name(scroll->direction)) +
                                   " but gesture dominant axis is " +
                                   std::string(direction_name(*dominant))});
        }
    }
    return out;
}

}  // namespace dpot
