#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "dpot/episode.hpp"

namespace testing_support {

inline dpot::UiElement text_el(int idx, std::string text, dpot::BBox box) {
    dpot::UiElement el;
    el.idx = idx;
    el.kind = dpot::ElementKind::Text;
    el.text = std::move(text);
    el.bbox = box;
    return el;
}

inline dpot::UiElement icon_el(int idx, std::string cls, dpot::BBox box) {
    dpot::UiElement el;
    el.idx = idx;
    el.kind = dpot::ElementKind::Icon;
    el.icon_class = std::move(cls);
    el.bbox = box;
    return el;
}

/// Screen of `n` stacked full-width rows labelled "item 0", "item 1", ...
inline dpot::Screen rows_screen(int n) {
    dpot::Screen s;
    for (int i = 0; i < n; ++i)
        s.elements.push_back(text_el(i, "item " + std::to_string(i),
                                     {{0.1, (i + 0.1) / n}, {0.9, (i + 0.9) / n}}));
    return s;
}

inline dpot::GoldStep click_step(const dpot::Screen& s, int idx) {
    dpot::GoldStep g;
    g.screen = s;
    g.action = dpot::Click{idx};
    const auto c = s.elements[static_cast<std::size_t>(idx)].bbox.center();
    g.gesture = dpot::GoldGesture{c, c};
    return g;
}

inline dpot::GoldStep plain_step(const dpot::Screen& s, dpot::Action a) {
    dpot::GoldStep g;
    g.screen = s;
    g.action = std::move(a);
    if (const auto* sc = std::get_if<dpot::Scroll>(&g.action)) {
        switch (sc->direction) {
            case dpot::ScrollDirection::Up: g.gesture = dpot::GoldGesture{{0.5, 0.8}, {0.5, 0.2}}; break;
            case dpot::ScrollDirection::Down: g.gesture = dpot::GoldGesture{{0.5, 0.2}, {0.5, 0.8}}; break;
            case dpot::ScrollDirection::Left: g.gesture = dpot::GoldGesture{{0.8, 0.5}, {0.2, 0.5}}; break;
            case dpot::ScrollDirection::Right: g.gesture = dpot::GoldGesture{{0.2, 0.5}, {0.8, 0.5}}; break;
        }
    }
    return g;
}

/// Episode with the given gold actions, each on a `rows`-element screen.
inline dpot::Episode make_episode(std::string id, std::vector<dpot::Action> actions, int rows = 4,
                                  std::string subset = "General", std::string goal = "open the settings page") {
    dpot::Episode e;
    e.id = std::move(id);
    e.subset = std::move(subset);
    e.goal = std::move(goal);
    const auto screen = rows_screen(rows);
    for (auto& a : actions) {
        if (const auto* c = std::get_if<dpot::Click>(&a); c && std::holds_alternative<int>(c->target))
            e.steps.push_back(click_step(screen, std::get<int>(c->target)));
        else
            e.steps.push_back(plain_step(screen, a));
    }
    return e;
}

inline std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(DPOT_SOURCE_DIR) / rel; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = std::filesystem::temp_directory_path() / ("dpot-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
