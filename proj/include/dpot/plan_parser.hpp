#pragma once

// Extraction of plan/step and action objects from raw model text, and the
// action description grammar used in execution histories.
//
// Model output is pseudo-JSON more often than not: single-quoted strings,
// code fences, prose around the object, Python literals. The reader below
// accepts all of those. A quote closes a string only when it is followed by
// a structural character (`,` `:` `}` `]`, or the end of input); a comma
// only counts when the next token can start a value or key. Apostrophes and
// unescaped inner quotes therefore survive inside string bodies.

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "dpot/episode.hpp"
#include "json.hpp"

namespace dpot {

struct Plan {
    std::vector<std::string> steps;
    std::string raw;

    friend bool operator==(const Plan&, const Plan&) = default;
};

struct ChosenStep {
    std::string text;
    friend bool operator==(const ChosenStep&, const ChosenStep&) = default;
};

enum class Recovery { CodeFenceStripped, SingleQuotesNormalized, TrailingProseDropped };

inline std::string_view recovery_name(Recovery r) {
    switch (r) {
        case Recovery::CodeFenceStripped: return "code_fence_stripped";
        case Recovery::SingleQuotesNormalized: return "single_quotes_normalized";
        case Recovery::TrailingProseDropped: return "trailing_prose_dropped";
    }
    return "?";
}

struct ParseDiagnostics {
    std::vector<Recovery> recovery_applied;
    bool ok = false;
    bool step_in_plan = true;  // false when the chosen step is not found in the plan text

    bool applied(Recovery r) const {
        return std::find(recovery_applied.begin(), recovery_applied.end(), r) != recovery_applied.end();
    }
};

enum class ParseErrorKind { NoObject, MissingKey, EmptyStep, EmptyPlan, UnknownAction, MissingPayload, InvalidPayload };

inline std::string_view parse_error_kind_name(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::NoObject: return "no_object";
        case ParseErrorKind::MissingKey: return "missing_key";
        case ParseErrorKind::EmptyStep: return "empty_step";
        case ParseErrorKind::EmptyPlan: return "empty_plan";
        case ParseErrorKind::UnknownAction: return "unknown_action";
        case ParseErrorKind::MissingPayload: return "missing_payload";
        case ParseErrorKind::InvalidPayload: return "invalid_payload";
    }
    return "?";
}

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, const std::string& message)
        : Error(std::string(parse_error_kind_name(kind)) + ": " + message), kind_(kind) {}
    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

namespace detail {

class LenientReader {
public:
    explicit LenientReader(std::string_view text) : s_(text) {}

    /// Parses one value starting exactly at `pos`. On success `end` is one
    /// past the last consumed character.
    std::optional<nlohmann::json> value_at(std::size_t pos, std::size_t& end) {
        pos_ = pos;
        depth_ = 0;
        auto v = value();
        if (v) end = pos_;
        return v;
    }

    bool used_single_quotes() const { return single_quotes_; }

private:
    static constexpr int kMaxDepth = 64;

    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::size_t next_non_space(std::size_t from) const {
        while (from < s_.size() && std::isspace(static_cast<unsigned char>(s_[from]))) ++from;
        return from;
    }

    // A quote at `q` terminates the string iff what follows is structural.
    bool closes_string(std::size_t q) const {
        const std::size_t n = next_non_space(q + 1);
        if (n >= s_.size()) return true;
        const char c = s_[n];
        if (c == '}' || c == ']' || c == ':') return true;
        if (c == ',') {
            const std::size_t m = next_non_space(n + 1);
            if (m >= s_.size()) return true;
            const char d = s_[m];
            if (d == '"' || d == '\'' || d == '{' || d == '[' || d == '}' || d == ']' || d == '-' ||
                std::isdigit(static_cast<unsigned char>(d)))
                return true;
            // unquoted key or bare literal
            std::size_t k = m;
            while (k < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[k])) || s_[k] == '_')) ++k;
            if (k == m) return false;
            const std::string_view word = s_.substr(m, k - m);
            const std::size_t after = next_non_space(k);
            const char a = after < s_.size() ? s_[after] : '\0';
            if (a == ':') return true;
            const bool literal = word == "true" || word == "false" || word == "null" || word == "True" ||
                                 word == "False" || word == "None";
            return literal && (a == ',' || a == ']' || a == '}' || a == '\0');
        }
        return false;
    }

    static void append_utf8(std::string& out, unsigned cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    std::optional<std::string> string() {
        const char quote = peek();
        if (quote == '\'') single_quotes_ = true;
        ++pos_;
        std::string out;
        while (!at_end()) {
            const char c = s_[pos_];
            if (c == '\\' && pos_ + 1 < s_.size()) {
                const char e = s_[pos_ + 1];
                pos_ += 2;
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    case 'b': out += '\b'; break;
                    case 'f': out += '\f'; break;
                    case 'u': {
                        unsigned cp = 0;
                        std::size_t k = 0;
                        for (; k < 4 && pos_ < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[pos_]));
                             ++k, ++pos_) {
                            const char h = static_cast<char>(std::tolower(static_cast<unsigned char>(s_[pos_])));
                            cp = cp * 16 + static_cast<unsigned>(h <= '9' ? h - '0' : h - 'a' + 10);
                        }
                        if (k == 4) append_utf8(out, cp);
                        break;
                    }
                    default: out += e; break;
                }
                continue;
            }
            if (c == quote && closes_string(pos_)) {
                ++pos_;
                // JSON strings must be valid UTF-8 for nlohmann; replace stray bytes
                return sanitize_utf8(out);
            }
            out += c;
            ++pos_;
        }
        return std::nullopt;
    }

    static std::string sanitize_utf8(const std::string& in) {
        std::string out;
        out.reserve(in.size());
        std::size_t i = 0;
        while (i < in.size()) {
            const auto c = static_cast<unsigned char>(in[i]);
            std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
            bool valid = len != 0 && i + len <= in.size();
            for (std::size_t k = 1; valid && k < len; ++k)
                valid = (static_cast<unsigned char>(in[i + k]) & 0xC0) == 0x80;
            if (valid) {
                out.append(in, i, len);
                i += len;
            } else {
                out += '?';
                ++i;
            }
        }
        return out;
    }

    std::optional<nlohmann::json> number() {
        static const std::regex num_re(R"(^-?\d+(\.\d+)?([eE][+-]?\d+)?)");
        std::match_results<std::string_view::const_iterator> m;
        if (!std::regex_search(s_.begin() + static_cast<std::ptrdiff_t>(pos_), s_.end(), m, num_re))
            return std::nullopt;
        const std::string tok = m.str(0);
        pos_ += tok.size();
        if (tok.find_first_of(".eE") == std::string::npos) {
            try {
                return nlohmann::json(std::stoll(tok));
            } catch (const std::out_of_range&) {
            }
        }
        try {
            return nlohmann::json(std::stod(tok));
        } catch (const std::out_of_range&) {
            return std::nullopt;
        }
    }

    std::string identifier() {
        std::string out;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) out += s_[pos_++];
        return out;
    }

    std::optional<nlohmann::json> object() {
        ++pos_;
        nlohmann::json obj = nlohmann::json::object();
        for (;;) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                return obj;
            }
            std::string key;
            if (peek() == '"' || peek() == '\'') {
                auto k = string();
                if (!k) return std::nullopt;
                key = std::move(*k);
            } else if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') {
                key = identifier();
            } else {
                return std::nullopt;
            }
            skip_ws();
            if (peek() != ':') return std::nullopt;
            ++pos_;
            auto v = value();
            if (!v) return std::nullopt;
            obj[key] = std::move(*v);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == '}') {
                ++pos_;
                return obj;
            }
            return std::nullopt;
        }
    }

    std::optional<nlohmann::json> array() {
        ++pos_;
        nlohmann::json arr = nlohmann::json::array();
        for (;;) {
            skip_ws();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            auto v = value();
            if (!v) return std::nullopt;
            arr.push_back(std::move(*v));
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            return std::nullopt;
        }
    }

    std::optional<nlohmann::json> value() {
        if (++depth_ > kMaxDepth) return std::nullopt;
        skip_ws();
        std::optional<nlohmann::json> out;
        const char c = peek();
        if (c == '{') {
            out = object();
        } else if (c == '[') {
            out = array();
        } else if (c == '"' || c == '\'') {
            if (auto str = string()) out = nlohmann::json(std::move(*str));
        } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
            out = number();
        } else if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::string word = identifier();
            if (word == "true" || word == "True") out = true;
            else if (word == "false" || word == "False") out = false;
            else if (word == "null" || word == "None") out = nullptr;
        }
        --depth_;
        return out;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    bool single_quotes_ = false;
};

struct Extracted {
    nlohmann::json object;
    ParseDiagnostics diag;
};

// Strips the first ``` fence pair (with optional language tag), if any.
inline std::string_view strip_fence(std::string_view text, ParseDiagnostics& diag) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return text;
    auto body = open + 3;
    const auto eol = text.find('\n', body);
    // language tag: word characters up to the end of the line
    if (eol != std::string_view::npos) {
        const auto tag = util::trim(text.substr(body, eol - body));
        if (tag.find_first_of("{}") == std::string_view::npos) body = eol + 1;
    }
    const auto close = text.find("```", body);
    diag.recovery_applied.push_back(Recovery::CodeFenceStripped);
    return text.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

/// Returns the first balanced object in `text` for which `accept` holds.
/// `found_any` reports whether any object parsed at all (accepted or not),
/// and `first_rejected` the first object that parsed but was not accepted.
template <class Accept>
std::optional<Extracted> find_object(std::string_view text, Accept accept, nlohmann::json* first_rejected = nullptr) {
    ParseDiagnostics diag;
    const std::string_view body = strip_fence(text, diag);
    for (std::size_t pos = body.find('{'); pos != std::string_view::npos; pos = body.find('{', pos + 1)) {
        LenientReader reader(body);
        std::size_t end = 0;
        auto v = reader.value_at(pos, end);
        if (!v || !v->is_object()) continue;
        if (!accept(*v)) {
            if (first_rejected && first_rejected->is_null()) *first_rejected = *v;
            continue;
        }
        Extracted out{std::move(*v), diag};
        if (reader.used_single_quotes()) out.diag.recovery_applied.push_back(Recovery::SingleQuotesNormalized);
        if (!util::trim(body.substr(0, pos)).empty() || !util::trim(body.substr(end)).empty())
            out.diag.recovery_applied.push_back(Recovery::TrailingProseDropped);
        out.diag.ok = true;
        return out;
    }
    return std::nullopt;
}

inline std::string strip_step_number(std::string_view s) {
    static const std::regex prefix(R"(^\s*(step\s*)?\d+\s*[.):]\s*)", std::regex::icase);
    return std::string(util::trim(std::regex_replace(std::string(s), prefix, "")));
}

}  // namespace detail

/// Splits a plan string at consecutive "1." "2." ... markers (optionally
/// written "Step 1."). Text before the first marker is dropped. A plan with
/// no markers is a single step.
inline std::vector<std::string> split_plan_steps(std::string_view plan) {
    static const std::regex marker(R"((^|\s)((step\s*)?(\d{1,3})[.)])(?=\s|$))", std::regex::icase);
    const std::string text(plan);
    struct Cut {
        std::size_t begin;  // start of the marker
        std::size_t body;   // first character after the marker
    };
    std::vector<Cut> cuts;
    int expected = 1;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (std::stoi(m[4].str()) != expected) continue;
        const auto begin = static_cast<std::size_t>(m.position(2));
        cuts.push_back({begin, begin + static_cast<std::size_t>(m.length(2))});
        ++expected;
    }
    std::vector<std::string> steps;
    if (cuts.empty()) {
        if (auto t = util::trim(text); !t.empty()) steps.emplace_back(t);
        return steps;
    }
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        const std::size_t stop = i + 1 < cuts.size() ? cuts[i + 1].begin : text.size();
        auto t = util::trim(std::string_view(text).substr(cuts[i].body, stop - cuts[i].body));
        if (!t.empty()) steps.emplace_back(t);
    }
    return steps;
}

namespace detail {

inline Plan plan_from_value(const nlohmann::json& v) {
    Plan plan;
    if (v.is_string()) {
        plan.raw = v.get<std::string>();
        plan.steps = split_plan_steps(plan.raw);
    } else if (v.is_array()) {
        for (const auto& item : v) {
            if (!item.is_string()) throw ParseError(ParseErrorKind::InvalidPayload, "plan list holds a non-string");
            if (auto s = strip_step_number(item.get<std::string>()); !s.empty()) plan.steps.push_back(s);
        }
        for (std::size_t i = 0; i < plan.steps.size(); ++i)
            plan.raw += (i ? " " : "") + std::to_string(i + 1) + ". " + plan.steps[i];
    } else {
        throw ParseError(ParseErrorKind::InvalidPayload, "plan is neither a string nor a list");
    }
    if (plan.steps.empty()) throw ParseError(ParseErrorKind::EmptyPlan, "plan has no steps");
    return plan;
}

inline ChosenStep step_from_value(const nlohmann::json& v) {
    if (!v.is_string()) throw ParseError(ParseErrorKind::InvalidPayload, "step is not a string");
    auto t = util::trim(v.get_ref<const std::string&>());
    if (t.empty()) throw ParseError(ParseErrorKind::EmptyStep, "step is empty");
    return ChosenStep{std::string(t)};
}

inline std::string missing_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys) {
    std::string out;
    for (const char* k : keys) {
        if (obj.contains(k)) continue;
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

inline bool step_in_plan(const Plan& plan, const ChosenStep& step) {
    const std::string needle = util::to_lower(step.text);
    if (util::to_lower(plan.raw).find(needle) != std::string::npos) return true;
    for (const auto& s : plan.steps)
        if (util::to_lower(s).find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace detail

struct PlanStepParse {
    Plan plan;
    ChosenStep step;
    ParseDiagnostics diagnostics;
};

/// Extracts the first object carrying both "plan" and "step".
inline PlanStepParse parse_plan_step(std::string_view text) {
    nlohmann::json rejected;
    auto found = detail::find_object(
        text, [](const nlohmann::json& o) { return o.contains("plan") && o.contains("step"); }, &rejected);
    if (!found) {
        if (rejected.is_null()) throw ParseError(ParseErrorKind::NoObject, "no JSON object found");
        throw ParseError(ParseErrorKind::MissingKey, "object lacks " + detail::missing_keys(rejected, {"plan", "step"}));
    }
    PlanStepParse out;
    out.step = detail::step_from_value(found->object["step"]);
    out.plan = detail::plan_from_value(found->object["plan"]);
    out.diagnostics = found->diag;
    out.diagnostics.step_in_plan = detail::step_in_plan(out.plan, out.step);
    return out;
}

/// Extracts the first object carrying "plan"; used when no step selection is requested.
inline std::pair<Plan, ParseDiagnostics> parse_plan_only(std::string_view text) {
    nlohmann::json rejected;
    auto found = detail::find_object(text, [](const nlohmann::json& o) { return o.contains("plan"); }, &rejected);
    if (!found) {
        if (rejected.is_null()) throw ParseError(ParseErrorKind::NoObject, "no JSON object found");
        throw ParseError(ParseErrorKind::MissingKey, "object lacks plan");
    }
    return {detail::plan_from_value(found->object["plan"]), found->diag};
}

/// Extracts the first object carrying "step"; used when the plan is supplied.
inline std::pair<ChosenStep, ParseDiagnostics> parse_step_only(std::string_view text) {
    nlohmann::json rejected;
    auto found = detail::find_object(text, [](const nlohmann::json& o) { return o.contains("step"); }, &rejected);
    if (!found) {
        if (rejected.is_null()) throw ParseError(ParseErrorKind::NoObject, "no JSON object found");
        throw ParseError(ParseErrorKind::MissingKey, "object lacks step");
    }
    return {detail::step_from_value(found->object["step"]), found->diag};
}

/// Maps the first object with an "action_type" key onto an Action. `diag`,
/// when given, receives the recoveries applied during extraction.
inline Action parse_action(std::string_view text, ParseDiagnostics* diag = nullptr) {
    nlohmann::json rejected;
    auto found =
        detail::find_object(text, [](const nlohmann::json& o) { return o.contains("action_type"); }, &rejected);
    if (!found) {
        if (rejected.is_null()) throw ParseError(ParseErrorKind::NoObject, "no JSON object found");
        throw ParseError(ParseErrorKind::MissingKey, "object lacks action_type");
    }
    if (diag) *diag = found->diag;
    const auto& obj = found->object;
    const auto& type_value = obj["action_type"];
    if (!type_value.is_string()) throw ParseError(ParseErrorKind::UnknownAction, "action_type is not a string");
    const std::string name = util::to_lower(util::trim(type_value.get_ref<const std::string&>()));
    const auto type = action_type_from_name(name);
    if (!type) throw ParseError(ParseErrorKind::UnknownAction, "unknown action_type \"" + name + "\"");

    switch (*type) {
        case ActionType::Click: {
            if (!obj.contains("idx")) throw ParseError(ParseErrorKind::MissingPayload, "click requires idx");
            const auto& idx = obj["idx"];
            long long value = -1;
            if (idx.is_number_integer()) {
                value = idx.get<long long>();
            } else if (idx.is_number_float() && idx.get<double>() == static_cast<double>(static_cast<long long>(idx.get<double>()))) {
                value = static_cast<long long>(idx.get<double>());
            } else if (idx.is_string()) {
                const auto t = util::trim(idx.get_ref<const std::string&>());
                if (!t.empty() && t.size() < 10 && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
                    value = std::stoll(std::string(t));
            }
            if (value < 0 || value > 1'000'000) throw ParseError(ParseErrorKind::InvalidPayload, "click idx must be a non-negative integer");
            return Click{static_cast<int>(value)};
        }
        case ActionType::Scroll: {
            if (!obj.contains("direction")) throw ParseError(ParseErrorKind::MissingPayload, "scroll requires direction");
            const auto& d = obj["direction"];
            const auto dir = d.is_string() ? direction_from_name(d.get_ref<const std::string&>()) : std::nullopt;
            if (!dir) throw ParseError(ParseErrorKind::InvalidPayload, "scroll direction must be up/down/left/right");
            return Scroll{*dir};
        }
        case ActionType::Type: {
            if (!obj.contains("text")) throw ParseError(ParseErrorKind::MissingPayload, "type requires text");
            const auto& t = obj["text"];
            if (t.is_string()) return TypeText{t.get<std::string>()};
            if (t.is_number()) return TypeText{t.dump()};
            throw ParseError(ParseErrorKind::InvalidPayload, "type text must be a string");
        }
        case ActionType::NavigateHome: return Navigate{NavDestination::Home};
        case ActionType::NavigateBack: return Navigate{NavDestination::Back};
        case ActionType::PressEnter: return PressEnter{};
        case ActionType::StatusComplete: return StatusComplete{};
    }
    throw ParseError(ParseErrorKind::UnknownAction, "unreachable");
}

/// Canonical JSON object for an action, the shape parse_action accepts.
inline nlohmann::json action_to_json(const Action& a) {
    nlohmann::json j;
    j["action_type"] = std::string(action_type_name(action_type(a)));
    if (const auto* c = std::get_if<Click>(&a)) {
        if (const auto* idx = std::get_if<int>(&c->target))
            j["idx"] = *idx;
        else
            j["point"] = {std::get<Point>(c->target).x, std::get<Point>(c->target).y};
    } else if (const auto* s = std::get_if<Scroll>(&a)) {
        j["direction"] = std::string(direction_name(s->direction));
    } else if (const auto* t = std::get_if<TypeText>(&a)) {
        j["text"] = t->text;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Description grammar

/// History line text for an action: "click [Shopping]", "click [9]",
/// "scroll up", "type", "navigate_home", "press_enter", "status_complete".
/// Clicks on text elements show the OCR text (possibly empty), clicks on
/// icons or without a screen show the index.
inline std::string describe_action(const Action& a, const Screen* screen = nullptr) {
    if (const auto* c = std::get_if<Click>(&a)) {
        if (const auto* idx = std::get_if<int>(&c->target)) {
            if (screen) {
                if (const UiElement* el = screen->find(*idx); el && el->kind == ElementKind::Text)
                    return "click [" + el->text + "]";
            }
            return "click [" + std::to_string(*idx) + "]";
        }
        const Point& p = std::get<Point>(c->target);
        return "click [" + util::fixed(p.x, 2) + ", " + util::fixed(p.y, 2) + "]";
    }
    if (const auto* s = std::get_if<Scroll>(&a)) return "scroll " + std::string(direction_name(s->direction));
    return std::string(action_type_name(action_type(a)));
}

/// Action type named by a description line, or nullopt when it is not in the grammar.
inline std::optional<ActionType> description_type(std::string_view description) {
    const std::string d = util::to_lower(util::trim(description));
    if (d.rfind("click [", 0) == 0 && d.back() == ']') return ActionType::Click;
    if (d.rfind("scroll ", 0) == 0 && direction_from_name(d.substr(7))) return ActionType::Scroll;
    if (d == "type" || d.rfind("type ", 0) == 0) return ActionType::Type;
    if (auto t = action_type_from_name(d); t && *t != ActionType::Click && *t != ActionType::Scroll) return t;
    return std::nullopt;
}

/// Grounds a step written in the description grammar against a screen.
/// Click targets may be an element index, a coordinate pair "x, y", or the
/// exact text of an element. "Mark the task as complete" maps to status_complete.
inline Action ground_description(std::string_view step, const Screen& screen) {
    const std::string trimmed(util::trim(step));
    std::string d = util::to_lower(trimmed);
    while (!d.empty() && (d.back() == '.' || d.back() == '!')) d.pop_back();
    for (char& c : d)
        if (c == ' ') c = '_';

    if (util::starts_with_ci(trimmed, "click [") && trimmed.back() == ']') {
        const std::string target(util::trim(std::string_view(trimmed).substr(7, trimmed.size() - 8)));
        if (!target.empty() && std::all_of(target.begin(), target.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            if (target.size() > 9) throw ParseError(ParseErrorKind::InvalidPayload, "click idx out of range");
            return Click{std::stoi(target)};
        }
        static const std::regex coord(R"(^\s*([01](?:\.\d+)?|\.\d+)\s*,\s*([01](?:\.\d+)?|\.\d+)\s*$)");
        std::smatch m;
        if (std::regex_match(target, m, coord)) return Click{Point{std::stod(m[1].str()), std::stod(m[2].str())}};
        for (const auto& el : screen.elements)
            if (!el.text.empty() && el.text == target) return Click{el.idx};
        for (const auto& el : screen.elements)
            if (!el.text.empty() && util::to_lower(el.text) == util::to_lower(target)) return Click{el.idx};
        throw ParseError(ParseErrorKind::InvalidPayload, "no element matches click target \"" + target + "\"");
    }
    if (d.rfind("scroll_", 0) == 0) {
        if (auto dir = direction_from_name(d.substr(7))) return Scroll{*dir};
        throw ParseError(ParseErrorKind::InvalidPayload, "unknown scroll direction in \"" + trimmed + "\"");
    }
    if (d == "type") return TypeText{""};
    if (util::starts_with_ci(trimmed, "type ")) {
        std::string text(util::trim(std::string_view(trimmed).substr(5)));
        if (text.size() >= 2 && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
        return TypeText{text};
    }
    if (d == "navigate_home") return Navigate{NavDestination::Home};
    if (d == "navigate_back") return Navigate{NavDestination::Back};
    if (d == "press_enter") return PressEnter{};
    if (d == "status_complete" || d.rfind("mark_the_task_as_complet", 0) == 0) return StatusComplete{};
    throw ParseError(ParseErrorKind::UnknownAction, "step is not in the description grammar: \"" + trimmed + "\"");
}

}  // namespace dpot
