#pragma once

// Pseudo-HTML screen markup and click-target geometry.
//
//   Text element:  <p id=N class="text" alt="T">T</p>
//   Icon element:  <img id=N class=CLASSNAME alt=""></p>
//
// The icon form keeps the mismatched </p> closing tag of the original prompt
// corpus. `<`, `>` and `"` in OCR text are replaced by spaces.

#include <array>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "dpot/episode.hpp"

namespace dpot {

struct ScreenMarkup {
    static constexpr std::string_view kHeader = "Screen:";
    std::vector<std::string> lines;

    /// "Screen: <first element>" then one element per line, no trailing newline.
    std::string render() const {
        std::string out(kHeader);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            out += i == 0 ? ' ' : '\n';
            out += lines[i];
        }
        return out;
    }

    friend bool operator==(const ScreenMarkup&, const ScreenMarkup&) = default;
};

inline std::string sanitize_markup_text(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c == '<' || c == '>' || c == '"' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

inline std::string markup_line(const UiElement& el) {
    const std::string id = std::to_string(el.idx);
    if (el.kind == ElementKind::Icon)
        return "<img id=" + id + " class=" + sanitize_markup_text(el.icon_class) + " alt=\"\"></p>";
    const std::string t = sanitize_markup_text(el.text);
    return "<p id=" + id + " class=\"text\" alt=\"" + t + "\">" + t + "</p>";
}

inline ScreenMarkup serialize_screen(const Screen& s) {
    ScreenMarkup m;
    m.lines.reserve(s.elements.size());
    for (const auto& el : s.elements) m.lines.push_back(markup_line(el));
    return m;
}

/// Element fields recovered from one markup line.
struct MarkupElement {
    int idx = 0;
    ElementKind kind = ElementKind::Text;
    std::string icon_class;
    std::string text;

    friend bool operator==(const MarkupElement&, const MarkupElement&) = default;
};

inline std::optional<MarkupElement> parse_markup_line(const std::string& line) {
    static const std::regex text_re(R"re(^<p id=(\d+) class="text" alt="([^"]*)">([^<]*)</p>$)re");
    static const std::regex icon_re(R"re(^<img id=(\d+) class=(\S+) alt=""></p>$)re");
    std::smatch m;
    if (std::regex_match(line, m, text_re)) {
        if (m[2].str() != m[3].str()) return std::nullopt;
        return MarkupElement{std::stoi(m[1].str()), ElementKind::Text, "", m[2].str()};
    }
    if (std::regex_match(line, m, icon_re))
        return MarkupElement{std::stoi(m[1].str()), ElementKind::Icon, m[2].str(), ""};
    return std::nullopt;
}

/// Sample points of a box in fixed order: top-left, top-right, bottom-left,
/// bottom-right, center.
inline std::array<Point, 5> element_points(const BBox& b) {
    return {Point{b.min.x, b.min.y}, Point{b.max.x, b.min.y}, Point{b.min.x, b.max.y},
            Point{b.max.x, b.max.y}, b.center()};
}

inline std::array<Point, 5> element_points(const UiElement& e) { return element_points(e.bbox); }

class UnresolvedTargetError : public Error {
public:
    explicit UnresolvedTargetError(int idx)
        : Error("click target idx " + std::to_string(idx) + " is not on the screen"), idx_(idx) {}
    int idx() const { return idx_; }

private:
    int idx_;
};

struct ResolvedTarget {
    BBox bbox;
    std::array<Point, 5> points;
};

inline std::optional<ResolvedTarget> try_resolve_click_target(const Screen& s, int idx) {
    const UiElement* el = s.find(idx);
    if (!el) return std::nullopt;
    return ResolvedTarget{el->bbox, element_points(*el)};
}

inline ResolvedTarget resolve_click_target(const Screen& s, int idx) {
    if (auto r = try_resolve_click_target(s, idx)) return *r;
    throw UnresolvedTargetError(idx);
}

}  // namespace dpot
