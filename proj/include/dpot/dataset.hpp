#pragma once

// Line-delimited episode records: one JSON object per line.
//
//   {"id": str, "subset": str, "goal": str,
//    "steps": [{"elements": [{"idx": int, "kind": "text"|"icon", "class": str?,
//                             "text": str, "bbox": [x0, y0, x1, y1]}],
//               "caption": str?, "image_ref": str?,
//               "gold": {"action_type": str, "idx": int?, "direction": str?,
//                        "text": str?, "touch": [x, y]?, "lift": [x, y]?,
//                        "point": [x, y]?}}]}
//
// "point" is only written for coordinate-targeted gold clicks whose target
// differs from the touch point.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include "dpot/episode.hpp"
#include "json.hpp"

namespace dpot {

using Json = nlohmann::ordered_json;

/// Malformed dataset input. `line` is 1-based, 0 when not tied to a line.
class DatasetError : public Error {
public:
    DatasetError(std::size_t line, std::string field, const std::string& message)
        : Error(compose(line, field, message)), line_(line), field_(std::move(field)), message_(message) {}

    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }

private:
    static std::string compose(std::size_t line, const std::string& field, const std::string& msg) {
        std::string out;
        if (line) out += "line " + std::to_string(line) + ": ";
        if (!field.empty()) out += field + ": ";
        return out + msg;
    }

    std::size_t line_;
    std::string field_;
    std::string message_;
};

namespace detail {

// Schema errors raised while decoding a single record; the loader attaches the line.
struct FieldError {
    std::string field;
    std::string message;
};

inline const Json& require(const Json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw FieldError{path, "expected an object"};
    auto it = obj.find(key);
    if (it == obj.end()) throw FieldError{path.empty() ? key : path + "." + key, "missing required field"};
    return *it;
}

inline const Json* optional_field(const Json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

inline std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) throw FieldError{path, "expected a string"};
    return v.get<std::string>();
}

inline int as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw FieldError{path, "expected an integer"};
    return v.get<int>();
}

inline double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw FieldError{path, "expected a number"};
    return v.get<double>();
}

inline Point as_point(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) throw FieldError{path, "expected [x, y]"};
    return {as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
}

inline Json point_json(const Point& p) { return Json::array({p.x, p.y}); }

inline UiElement element_from_json(const Json& j, const std::string& path) {
    UiElement el;
    el.idx = as_int(require(j, "idx", path), path + ".idx");
    const std::string kind = as_string(require(j, "kind", path), path + ".kind");
    if (kind == "text") {
        el.kind = ElementKind::Text;
    } else if (kind == "icon") {
        el.kind = ElementKind::Icon;
        el.icon_class = as_string(require(j, "class", path), path + ".class");
    } else {
        throw FieldError{path + ".kind", "expected \"text\" or \"icon\", got \"" + kind + "\""};
    }
    if (const Json* text = optional_field(j, "text")) el.text = as_string(*text, path + ".text");
    const Json& bbox = require(j, "bbox", path);
    if (!bbox.is_array() || bbox.size() != 4) throw FieldError{path + ".bbox", "expected [x0, y0, x1, y1]"};
    el.bbox.min = {as_number(bbox[0], path + ".bbox"), as_number(bbox[1], path + ".bbox")};
    el.bbox.max = {as_number(bbox[2], path + ".bbox"), as_number(bbox[3], path + ".bbox")};
    return el;
}

inline Json element_to_json(const UiElement& el) {
    Json j;
    j["idx"] = el.idx;
    j["kind"] = el.kind == ElementKind::Text ? "text" : "icon";
    if (el.kind == ElementKind::Icon) j["class"] = el.icon_class;
    j["text"] = el.text;
    j["bbox"] = Json::array({el.bbox.min.x, el.bbox.min.y, el.bbox.max.x, el.bbox.max.y});
    return j;
}

inline void gold_from_json(const Json& g, const std::string& path, GoldStep& step) {
    const std::string type_name = as_string(require(g, "action_type", path), path + ".action_type");
    const auto type = action_type_from_name(type_name);
    if (!type) throw FieldError{path + ".action_type", "unknown action type \"" + type_name + "\""};

    const Json* touch = optional_field(g, "touch");
    const Json* lift = optional_field(g, "lift");
    if (touch || lift) {
        if (!touch) throw FieldError{path + ".touch", "missing required field"};
        if (!lift) throw FieldError{path + ".lift", "missing required field"};
        step.gesture = GoldGesture{as_point(*touch, path + ".touch"), as_point(*lift, path + ".lift")};
    }

    switch (*type) {
        case ActionType::Click: {
            if (const Json* idx = optional_field(g, "idx")) {
                step.action = Click{as_int(*idx, path + ".idx")};
            } else if (const Json* pt = optional_field(g, "point")) {
                step.action = Click{as_point(*pt, path + ".point")};
            } else if (step.gesture) {
                step.action = Click{step.gesture->touch};
            } else {
                throw FieldError{path + ".idx", "click needs idx, point or a touch gesture"};
            }
            break;
        }
        case ActionType::Scroll: {
            if (const Json* dir = optional_field(g, "direction")) {
                const std::string name = as_string(*dir, path + ".direction");
                const auto d = direction_from_name(name);
                if (!d) throw FieldError{path + ".direction", "unknown direction \"" + name + "\""};
                step.action = Scroll{*d};
            } else if (step.gesture && gesture_direction(*step.gesture)) {
                step.action = Scroll{*gesture_direction(*step.gesture)};
            } else {
                throw FieldError{path + ".direction", "missing required field"};
            }
            break;
        }
        case ActionType::Type:
            step.action = TypeText{as_string(require(g, "text", path), path + ".text")};
            break;
        case ActionType::NavigateHome: step.action = Navigate{NavDestination::Home}; break;
        case ActionType::NavigateBack: step.action = Navigate{NavDestination::Back}; break;
        case ActionType::PressEnter: step.action = PressEnter{}; break;
        case ActionType::StatusComplete: step.action = StatusComplete{}; break;
    }
}

inline Json gold_to_json(const GoldStep& step) {
    Json g;
    g["action_type"] = std::string(action_type_name(action_type(step.action)));
    if (const auto* c = std::get_if<Click>(&step.action)) {
        if (const auto* idx = std::get_if<int>(&c->target)) {
            g["idx"] = *idx;
        } else if (!step.gesture || std::get<Point>(c->target) != step.gesture->touch) {
            g["point"] = point_json(std::get<Point>(c->target));
        }
    } else if (const auto* s = std::get_if<Scroll>(&step.action)) {
        g["direction"] = std::string(direction_name(s->direction));
    } else if (const auto* t = std::get_if<TypeText>(&step.action)) {
        g["text"] = t->text;
    }
    if (step.gesture) {
        g["touch"] = point_json(step.gesture->touch);
        g["lift"] = point_json(step.gesture->lift);
    }
    return g;
}

inline std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Decodes one episode record. Throws DatasetError (line 0) naming the offending field.
inline Episode episode_from_json(const Json& j) {
    try {
        Episode e;
        e.id = detail::as_string(detail::require(j, "id", ""), "id");
        e.subset = detail::as_string(detail::require(j, "subset", ""), "subset");
        e.goal = detail::as_string(detail::require(j, "goal", ""), "goal");
        const Json& steps = detail::require(j, "steps", "");
        if (!steps.is_array()) throw detail::FieldError{"steps", "expected an array"};
        for (std::size_t s = 0; s < steps.size(); ++s) {
            const std::string path = "steps[" + std::to_string(s) + "]";
            const Json& sj = steps[s];
            GoldStep step;
            const Json& elements = detail::require(sj, "elements", path);
            if (!elements.is_array()) throw detail::FieldError{path + ".elements", "expected an array"};
            for (std::size_t i = 0; i < elements.size(); ++i)
                step.screen.elements.push_back(detail::element_from_json(
                    elements[i], path + ".elements[" + std::to_string(i) + "]"));
            if (const Json* cap = detail::optional_field(sj, "caption"))
                step.screen.caption = detail::as_string(*cap, path + ".caption");
            if (const Json* img = detail::optional_field(sj, "image_ref"))
                step.screen.image_ref = detail::as_string(*img, path + ".image_ref");
            detail::gold_from_json(detail::require(sj, "gold", path), path + ".gold", step);
            e.steps.push_back(std::move(step));
        }
        return e;
    } catch (const detail::FieldError& fe) {
        throw DatasetError(0, fe.field, fe.message);
    }
}

inline Json episode_to_json(const Episode& e) {
    Json j;
    j["id"] = e.id;
    j["subset"] = e.subset;
    j["goal"] = e.goal;
    Json steps = Json::array();
    for (const auto& step : e.steps) {
        Json sj;
        Json elements = Json::array();
        for (const auto& el : step.screen.elements) elements.push_back(detail::element_to_json(el));
        sj["elements"] = std::move(elements);
        if (step.screen.caption) sj["caption"] = *step.screen.caption;
        if (step.screen.image_ref) sj["image_ref"] = *step.screen.image_ref;
        sj["gold"] = detail::gold_to_json(step);
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    return j;
}

/// Serializes episodes as line-delimited records, one per line, in order.
inline std::string serialize_episodes(const std::vector<Episode>& episodes) {
    std::string out;
    for (const auto& e : episodes) {
        out += episode_to_json(e).dump();
        out += '\n';
    }
    return out;
}

/// Parses line-delimited episode records from memory. Blank lines are skipped.
/// Every episode is validated; the first violation of an invalid episode is
/// reported with its line number.
inline std::vector<Episode> parse_episodes(std::istream& in,
                                           const std::optional<std::set<std::string>>& subset_filter = {}) {
    std::vector<Episode> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& pe) {
            throw DatasetError(lineno, "", std::string("invalid JSON: ") + pe.what());
        }
        Episode e;
        try {
            e = episode_from_json(j);
        } catch (const DatasetError& de) {
            throw DatasetError(lineno, de.field(), de.message());
        }
        if (const auto violations = validate_episode(e); !violations.empty())
            throw DatasetError(lineno, violations.front().field, violations.front().message);
        if (!seen.insert(e.id).second) throw DatasetError(lineno, "id", "duplicate episode id \"" + e.id + "\"");
        if (subset_filter && !subset_filter->count(e.subset)) continue;
        out.push_back(std::move(e));
    }
    return out;
}

inline Dataset load_dataset(const std::filesystem::path& path,
                            const std::optional<std::set<std::string>>& subset_filter = {}) {
    std::ifstream in(path);
    if (!in) throw DatasetError(0, "", "cannot read dataset file " + path.string());
    Dataset ds;
    ds.episodes = parse_episodes(in, subset_filter);
    ds.manifest.source = path.string();
    ds.manifest.loaded_at = detail::utc_now_iso();
    ds.manifest.subset_counts = count_subsets(ds.episodes);
    return ds;
}

inline void save_dataset(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write dataset file " + path.string());
    out << serialize_episodes(episodes);
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace dpot
