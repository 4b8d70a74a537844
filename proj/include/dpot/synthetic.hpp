#pragma once

// Deterministic synthetic episodes for desk-scale runs.
//
// Only raw std::mt19937_64 outputs are consumed (the engine's sequence is
// fixed by the standard; std distributions are not), so a seed produces the
// same dataset with any standard library.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "dpot/episode.hpp"

namespace dpot {

struct SyntheticParams {
    int min_steps = 3;  // includes the final status_complete step
    int max_steps = 8;
    int min_elements = 4;
    int max_elements = 12;
    int min_words = 1;  // words per text element
    int max_words = 3;
};

namespace detail {

class SeededStream {
public:
    explicit SeededStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform integer in [lo, hi].
    int range(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }
    // Uniform real in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double between(double lo, double hi) { return lo + (hi - lo) * unit(); }

    template <class Container>
    const auto& pick(const Container& c) {
        return c[static_cast<std::size_t>(range(0, static_cast<int>(std::size(c)) - 1))];
    }

private:
    std::mt19937_64 engine_;
};

inline constexpr std::array<const char*, 5> kSubsets = {"General", "GoogleApps", "Install", "Single",
                                                        "WebShopping"};
inline constexpr std::array<const char*, 12> kApps = {"Settings", "Calendar", "Gmail",   "Chrome",
                                                      "Photos",   "Maps",     "Clock",   "Play Store",
                                                      "YouTube",  "Messages", "Weather", "Contacts"};
inline constexpr std::array<const char*, 10> kVerbs = {"open",  "check", "find",   "search for", "turn on",
                                                       "share", "add",   "remove", "look up",    "set up"};
inline constexpr std::array<const char*, 12> kObjects = {
    "phone information", "the alarm",      "a new contact",   "today's forecast",
    "the latest email",  "wifi settings",  "a nearby cafe",   "the price of a ladder",
    "battery usage",     "recent photos",  "a reminder",      "dark mode"};
inline constexpr std::array<const char*, 24> kWords = {
    "Storage", "Sound",   "Privacy", "Location", "Search",  "Account", "Display", "Battery",
    "Network", "Apps",    "Shopping", "Cart",    "Weather", "Home",    "Mail",    "Inbox",
    "Settings", "Photos", "Share",   "Install",  "Open",    "Update",  "Price",   "Done"};
inline constexpr std::array<const char*, 10> kIconClasses = {
    "ICON_CLOUD", "ICON_CALL",          "ICON_CHAT", "ICON_PLAY",         "ICON_GOOGLE",
    "ICON_MIC",   "ICON_NAV_BAR_RECT", "ICON_STAR", "ICON_NAV_BAR_CIRCLE", "ICON_V_BACKWARD"};

inline std::string words(SeededStream& rng, int lo, int hi) {
    const int n = rng.range(lo, hi);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += rng.pick(kWords);
    }
    return out;
}

inline Screen synthetic_screen(SeededStream& rng, const SyntheticParams& p) {
    Screen screen;
    const int m = rng.range(p.min_elements, p.max_elements);
    const double row = 1.0 / m;
    std::set<std::string> used;
    for (int k = 0; k < m; ++k) {
        UiElement el;
        el.idx = k;
        const double x0 = rng.between(0.02, 0.5);
        const double x1 = rng.between(x0 + 0.1, 0.98);
        el.bbox = {{x0, k * row + 0.1 * row}, {x1, (k + 1) * row - 0.1 * row}};
        if (rng.unit() < 0.3) {
            el.kind = ElementKind::Icon;
            el.icon_class = rng.pick(kIconClasses);
        } else {
            el.kind = ElementKind::Text;
            std::string text = words(rng, p.min_words, p.max_words);
            // element texts are unique per screen so text-based descriptions stay unambiguous
            for (int suffix = 2; used.count(text); ++suffix)
                text = words(rng, p.min_words, p.max_words) + " " + std::to_string(suffix);
            used.insert(text);
            el.text = std::move(text);
        }
        screen.elements.push_back(std::move(el));
    }
    return screen;
}

inline GoldGesture swipe(SeededStream& rng, ScrollDirection d) {
    const double j1 = rng.between(-0.05, 0.05);
    const double j2 = rng.between(-0.05, 0.05);
    switch (d) {
        case ScrollDirection::Up: return {{0.5 + j1, 0.75 + j2}, {0.5 - j1, 0.25 + j2}};
        case ScrollDirection::Down: return {{0.5 + j1, 0.25 + j2}, {0.5 - j1, 0.75 + j2}};
        case ScrollDirection::Left: return {{0.8 + j2, 0.5 + j1}, {0.2 + j2, 0.5 - j1}};
        case ScrollDirection::Right: return {{0.2 + j2, 0.5 + j1}, {0.8 + j2, 0.5 - j1}};
    }
    return {};
}

// Non-final action types, weighted roughly like a phone-control corpus.
inline ActionType sample_step_type(SeededStream& rng) {
    const double u = rng.unit();
    if (u < 0.55) return ActionType::Click;
    if (u < 0.70) return ActionType::Scroll;
    if (u < 0.82) return ActionType::Type;
    if (u < 0.89) return ActionType::NavigateHome;
    if (u < 0.93) return ActionType::NavigateBack;
    return ActionType::PressEnter;
}

inline GoldStep synthetic_step(SeededStream& rng, const SyntheticParams& p, ActionType type) {
    GoldStep step;
    step.screen = synthetic_screen(rng, p);
    switch (type) {
        case ActionType::Click: {
            const int idx = rng.range(0, static_cast<int>(step.screen.elements.size()) - 1);
            const BBox& b = step.screen.elements[static_cast<std::size_t>(idx)].bbox;
            const Point tap{rng.between(b.min.x, b.max.x), rng.between(b.min.y, b.max.y)};
            step.action = Click{idx};
            step.gesture = GoldGesture{tap, tap};
            break;
        }
        case ActionType::Scroll: {
            constexpr std::array<ScrollDirection, 4> dirs = {ScrollDirection::Up, ScrollDirection::Down,
                                                             ScrollDirection::Left, ScrollDirection::Right};
            const auto d = rng.pick(dirs);
            step.action = Scroll{d};
            step.gesture = swipe(rng, d);
            break;
        }
        case ActionType::Type: step.action = TypeText{util::to_lower(words(rng, 1, 3))}; break;
        case ActionType::NavigateHome: step.action = Navigate{NavDestination::Home}; break;
        case ActionType::NavigateBack: step.action = Navigate{NavDestination::Back}; break;
        case ActionType::PressEnter: step.action = PressEnter{}; break;
        case ActionType::StatusComplete: step.action = StatusComplete{}; break;
    }
    return step;
}

}  // namespace detail

/// Generates `n_episodes` episodes as a pure function of (seed, n_episodes, params).
/// Subsets are assigned round-robin; every episode contains at least one click
/// and ends with status_complete.
inline Dataset generate_synthetic(std::uint64_t seed, int n_episodes, const SyntheticParams& params = {}) {
    if (n_episodes < 1) throw Error("generate_synthetic: n_episodes must be >= 1");
    if (params.min_steps < 2 || params.min_steps > params.max_steps)
        throw Error("generate_synthetic: step range must satisfy 2 <= min <= max");
    if (params.min_elements < 1 || params.min_elements > params.max_elements)
        throw Error("generate_synthetic: element range must satisfy 1 <= min <= max");
    if (params.min_words < 1 || params.min_words > params.max_words)
        throw Error("generate_synthetic: word range must satisfy 1 <= min <= max");

    detail::SeededStream rng(seed);
    Dataset ds;
    for (int i = 0; i < n_episodes; ++i) {
        Episode e;
        char id[48];
        std::snprintf(id, sizeof id, "syn-%llu-%04d", static_cast<unsigned long long>(seed), i);
        e.id = id;
        e.subset = detail::kSubsets[static_cast<std::size_t>(i) % detail::kSubsets.size()];
        const std::string app = rng.pick(detail::kApps);
        e.goal = std::string(rng.pick(detail::kVerbs)) + " " + rng.pick(detail::kObjects) + " in " + app;

        const int length = rng.range(params.min_steps, params.max_steps);
        std::vector<ActionType> types;
        for (int s = 0; s + 1 < length; ++s) types.push_back(detail::sample_step_type(rng));
        if (std::find(types.begin(), types.end(), ActionType::Click) == types.end())
            types[static_cast<std::size_t>(rng.range(0, length - 2))] = ActionType::Click;
        types.push_back(ActionType::StatusComplete);

        for (ActionType t : types) e.steps.push_back(detail::synthetic_step(rng, params, t));
        e.steps.front().screen.caption =
            "A screenshot of the " + app + " app showing " +
            std::to_string(e.steps.front().screen.elements.size()) + " items.";
        ds.episodes.push_back(std::move(e));
    }
    ds.manifest.source = "synthetic:seed=" + std::to_string(seed) + ",n=" + std::to_string(n_episodes);
    ds.manifest.subset_counts = count_subsets(ds.episodes);
    return ds;
}

}  // namespace dpot
