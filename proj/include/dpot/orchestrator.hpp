#pragma once

// Replay-mode episode runner. At turn i the agent observes gold screen i
// whatever it predicted before; predictions are scored afterwards.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dpot/gateway.hpp"
#include "dpot/history.hpp"
#include "dpot/plan_parser.hpp"
#include "dpot/prompting.hpp"
#include "dpot/retriever.hpp"
#include "dpot/screen.hpp"

namespace dpot {

enum class Termination { Continue, StatusComplete, MaxTurns, EpisodeEnd };

inline std::string_view termination_name(Termination t) {
    switch (t) {
        case Termination::Continue: return "continue";
        case Termination::StatusComplete: return "status_complete";
        case Termination::MaxTurns: return "max_turns";
        case Termination::EpisodeEnd: return "episode_end";
    }
    return "?";
}

inline std::optional<Termination> termination_from_name(std::string_view s) {
    for (auto t : {Termination::Continue, Termination::StatusComplete, Termination::MaxTurns, Termination::EpisodeEnd})
        if (termination_name(t) == s) return t;
    return std::nullopt;
}

enum class Grounding { ModelCall, DescriptionGrammar };

struct ExternalPlan {
    std::string plan;
    std::optional<std::string> step;
};

/// Injected plans keyed by (episode id, turn).
using ExternalPlans = std::map<std::pair<std::string, int>, ExternalPlan>;

struct RunConfig {
    Strategy strategy;
    std::optional<int> max_turns;  // unset: run until the replay is exhausted
    DecodingConfig decoding;
    std::shared_ptr<const ExternalPlans> external_plans;  // set: plans come from the file, not the model
    Grounding grounding = Grounding::ModelCall;
    PromptOptions prompt;
    bool store_prompts = false;
    std::size_t reference_k = 2;
    ReferenceSource reference_source = ReferenceSource::Gold;
    RetrievalPool reference_pool = RetrievalPool::SameSubset;
    std::shared_ptr<const PredictedDescriptions> predicted_references;

    void validate() const {
        if (max_turns && *max_turns < 1) throw Error("max_turns must be positive");
        if (external_plans && !strategy.plans())
            throw Error("external plans require a planning strategy, not " + strategy.name());
        if (strategy.kind == Strategy::Kind::ReAct && strategy.history_len && *strategy.history_len < 0)
            throw Error("react history length must be >= 0");
        if (reference_k == 0) throw Error("reference_k must be positive");
        if (reference_source == ReferenceSource::Predicted && strategy.uses_reference() && !predicted_references)
            throw Error("predicted references need traces from an earlier run");
    }
};

struct TurnRecord {
    int turn = 0;
    std::string prompt_digest;
    std::vector<std::string> prompts;  // full prompt text, only when requested
    std::string raw_plan_text;         // planning-call output; empty when no planning call was made
    std::optional<Plan> plan;
    std::optional<ChosenStep> step;
    std::string raw_action_text;       // grounding or direct-action call output
    std::optional<Action> action;      // absent: the prediction could not be parsed
    std::string action_error;
    std::string history_entry;
    std::vector<std::string> notes;
    UsageStats usage;
    double latency_s = 0.0;
    int calls = 0;
};

struct EpisodeTrace {
    std::string episode_id;
    Strategy strategy;
    std::vector<TurnRecord> turns;
    std::optional<Termination> terminated_by;
    bool aborted = false;
    std::string abort_reason;
};

inline Termination is_terminal(const std::optional<Action>& action, int turn, const Episode& e, const RunConfig& cfg) {
    if (action && std::holds_alternative<StatusComplete>(*action)) return Termination::StatusComplete;
    if (cfg.max_turns && turn + 1 >= *cfg.max_turns) return Termination::MaxTurns;
    if (static_cast<std::size_t>(turn + 1) >= e.steps.size()) return Termination::EpisodeEnd;
    return Termination::Continue;
}

inline Termination is_terminal(const Action& action, int turn, const Episode& e, const RunConfig& cfg) {
    return is_terminal(std::optional<Action>(action), turn, e, cfg);
}

struct ReactReply {
    std::string thought;
    std::optional<Action> action;
    std::string error;
};

/// Splits "Thought: ... Action: {...}" replies. Without an "Action:" marker the
/// whole reply is searched for an action object.
inline ReactReply parse_react_reply(std::string_view text) {
    ReactReply out;
    const std::string lower = util::to_lower(text);
    const auto marker = lower.rfind("action:");
    std::string_view thought = marker == std::string::npos ? std::string_view{} : text.substr(0, marker);
    const std::string_view action_text = marker == std::string::npos ? text : text.substr(marker + 7);
    thought = util::trim(thought);
    if (util::starts_with_ci(thought, "thought:")) thought = util::trim(thought.substr(8));
    out.thought = std::string(thought);
    try {
        out.action = parse_action(action_text);
    } catch (const ParseError& e) {
        out.error = e.what();
    }
    return out;
}

/// Called after every completed turn with the record and the updated history.
using TurnObserver = std::function<void(const Episode&, const TurnRecord&, const ExecutionHistory&)>;

struct RunServices {
    ChatBackend* backend = nullptr;
    const RetrievalIndex* retriever = nullptr;  // required iff the strategy uses references
    GatewayOptions gateway;
    TurnObserver observer;
};

namespace detail {

class TurnCalls {
public:
    TurnCalls(TurnRecord& rec, const RunConfig& cfg, RunServices& svc, const Screen& screen)
        : rec_(rec), cfg_(cfg), svc_(svc), screen_(screen) {}

    std::string operator()(PromptBundle bundle) {
        if (svc_.backend->multimodal()) bundle = attach_screenshot(std::move(bundle), screen_.image_ref);
        const std::string flat = bundle.flatten();
        digest_ = util::fnv1a64(flat, digest_);
        digest_ = util::fnv1a64(std::string_view("\0", 1), digest_);
        if (cfg_.store_prompts) rec_.prompts.push_back(flat);
        CompletionResult r = complete(bundle, cfg_.decoding, *svc_.backend, svc_.gateway);
        rec_.usage += r.usage;
        rec_.latency_s += r.latency_s;
        ++rec_.calls;
        rec_.prompt_digest = "fnv1a64:" + util::hex64(digest_);
        return std::move(r.text);
    }

private:
    TurnRecord& rec_;
    const RunConfig& cfg_;
    RunServices& svc_;
    const Screen& screen_;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
};

inline void predict_direct(TurnRecord& rec, TurnCalls& call, const Episode& e, const ScreenMarkup& markup, int turn) {
    rec.raw_action_text = call(build_baseline_prompt({Strategy::Kind::NP, {}}, e.goal, markup, {turn, {}, {}}));
    try {
        rec.action = parse_action(rec.raw_action_text);
    } catch (const ParseError& err) {
        rec.action_error = err.what();
    }
}

inline void ground(TurnRecord& rec, TurnCalls& call, const RunConfig& cfg, const Episode& e, const Screen& screen,
                   const ScreenMarkup& markup, const std::string& step_text, int turn) {
    try {
        if (cfg.grounding == Grounding::ModelCall) {
            rec.raw_action_text = call(build_grounding_prompt(step_text, markup, e.goal, turn, cfg.strategy));
            rec.action = parse_action(rec.raw_action_text);
        } else {
            rec.action = ground_description(step_text, screen);
        }
    } catch (const ParseError& err) {
        rec.action_error = err.what();
    }
}

inline void note_diagnostics(TurnRecord& rec, const ParseDiagnostics& d) {
    for (auto r : d.recovery_applied) rec.notes.push_back("recovery:" + std::string(recovery_name(r)));
    if (!d.step_in_plan) rec.notes.push_back("step_not_in_plan");
}

}  // namespace detail

/// Runs one episode to termination. Gateway failures that survive retries
/// abort the episode; the trace then holds the turns completed so far.
inline EpisodeTrace run_episode(const Episode& e, const RunConfig& cfg, RunServices svc) {
    cfg.validate();
    if (!svc.backend) throw Error("run_episode: no backend");
    if (cfg.strategy.uses_reference() != (svc.retriever != nullptr))
        throw Error(cfg.strategy.uses_reference() ? "reference planning requires a retriever"
                                                  : "a retriever is only valid with reference planning");
    if (e.steps.empty()) throw Error("run_episode: episode " + e.id + " has no steps");

    EpisodeTrace trace;
    trace.episode_id = e.id;
    trace.strategy = cfg.strategy;

    ExecutionHistory history;
    std::vector<ReactRound> react_rounds;
    std::optional<Plan> frozen_plan;
    std::optional<ReferenceBlock> references;

    try {
        if (cfg.strategy.uses_reference()) {
            const auto refs = svc.retriever->top_k(e, cfg.reference_k, cfg.reference_pool);
            references = build_reference_block(refs, cfg.reference_source, cfg.predicted_references.get());
        }

        for (int turn = 0;; ++turn) {
            const Screen& screen = e.steps[static_cast<std::size_t>(turn)].screen;
            const ScreenMarkup markup = serialize_screen(screen);
            TurnRecord rec;
            rec.turn = turn;
            detail::TurnCalls call(rec, cfg, svc, screen);
            const auto history_lines = render_history(history);
            const Strategy& st = cfg.strategy;

            if (st.kind == Strategy::Kind::NP) {
                detail::predict_direct(rec, call, e, markup, turn);
            } else if (st.kind == Strategy::Kind::ReAct) {
                rec.raw_action_text =
                    call(build_baseline_prompt(st, e.goal, markup, {turn, {}, react_rounds}));
                ReactReply reply = parse_react_reply(rec.raw_action_text);
                rec.action = std::move(reply.action);
                rec.action_error = std::move(reply.error);
                react_rounds.push_back({markup.render(), rec.raw_action_text});
            } else {
                // planning strategies: obtain (plan, step), then ground the step
                const bool with_history = st.kind == Strategy::Kind::DPoT || st.kind == Strategy::Kind::DPoTWithReference;
                std::optional<std::string> grounding_text;
                try {
                    const ExternalPlan* injected = nullptr;
                    if (cfg.external_plans) {
                        if (auto it = cfg.external_plans->find({e.id, turn}); it != cfg.external_plans->end())
                            injected = &it->second;
                        else
                            rec.notes.push_back("external_plan_missing");
                    }
                    if (injected) {
                        rec.notes.push_back("external_plan");
                        rec.plan = Plan{split_plan_steps(injected->plan), injected->plan};
                        if (injected->step) {
                            rec.step = ChosenStep{*injected->step};
                        } else {
                            using Hist = std::pair<std::span<const std::string>, std::span<const std::string>>;
                            std::optional<Hist> hist;
                            if (with_history) hist = Hist{history_lines, history.steps_taken};
                            rec.raw_plan_text =
                                call(build_given_plan_prompt(e.goal, markup, injected->plan, hist, st, turn, cfg.prompt));
                            auto [step, diag] = parse_step_only(rec.raw_plan_text);
                            detail::note_diagnostics(rec, diag);
                            rec.step = std::move(step);
                        }
                    } else if (st.kind == Strategy::Kind::DP) {
                        rec.raw_plan_text = call(build_baseline_prompt(st, e.goal, markup, {turn, {}, {}}));
                        auto [plan, diag] = parse_plan_only(rec.raw_plan_text);
                        detail::note_diagnostics(rec, diag);
                        rec.plan = std::move(plan);
                    } else if (st.kind == Strategy::Kind::SP && frozen_plan) {
                        rec.raw_plan_text = call(build_baseline_prompt(st, e.goal, markup, {turn, frozen_plan->raw, {}}));
                        auto [step, diag] = parse_step_only(rec.raw_plan_text);
                        detail::note_diagnostics(rec, diag);
                        rec.plan = frozen_plan;
                        rec.step = std::move(step);
                    } else {
                        PromptBundle prompt =
                            st.kind == Strategy::Kind::DPoTWithReference
                                ? build_planning_prompt_with_reference(e.goal, markup, history_lines, history.steps_taken,
                                                                       *references, cfg.prompt, turn)
                            : st.kind == Strategy::Kind::SP
                                ? build_planning_prompt(e.goal, markup, {}, {}, cfg.prompt, turn, st)
                                : build_planning_prompt(e.goal, markup, history_lines, history.steps_taken, cfg.prompt,
                                                        turn, st);
                        rec.raw_plan_text = call(std::move(prompt));
                        PlanStepParse parsed = parse_plan_step(rec.raw_plan_text);
                        detail::note_diagnostics(rec, parsed.diagnostics);
                        rec.plan = std::move(parsed.plan);
                        rec.step = std::move(parsed.step);
                        if (st.kind == Strategy::Kind::SP) frozen_plan = rec.plan;
                    }
                    grounding_text = rec.step ? rec.step->text : rec.plan->steps.front();
                } catch (const ParseError& err) {
                    rec.notes.push_back(std::string("plan_parse_failed: ") + err.what());
                    rec.notes.push_back("downgraded_to_direct_action");
                }
                if (grounding_text)
                    detail::ground(rec, call, cfg, e, screen, markup, *grounding_text, turn);
                else
                    detail::predict_direct(rec, call, e, markup, turn);
            }

            history = update_history(std::move(history), turn, rec.action,
                                     st.kind == Strategy::Kind::DP ? std::nullopt : rec.step, screen);
            rec.history_entry = history.entries.back().action_description;
            if (svc.observer) svc.observer(e, rec, history);
            const Termination verdict = is_terminal(rec.action, turn, e, cfg);
            trace.turns.push_back(std::move(rec));
            if (verdict != Termination::Continue) {
                trace.terminated_by = verdict;
                break;
            }
        }
    } catch (const GatewayError& err) {
        trace.aborted = true;
        trace.abort_reason = err.what();
    }
    return trace;
}

/// Creates the backend for one episode run (scripted: a fresh queue per episode).
using BackendFactory = std::function<std::shared_ptr<ChatBackend>(const Episode&)>;

/// Runs episodes on up to `parallel` threads. `sink` receives traces in input
/// order, serialized, as soon as every earlier episode has finished.
inline void run_episodes(const std::vector<Episode>& episodes, const RunConfig& cfg, const BackendFactory& make_backend,
                         const RetrievalIndex* retriever, const GatewayOptions& gateway, std::size_t parallel,
                         const std::function<void(const Episode&, EpisodeTrace)>& sink, TurnObserver observer = {}) {
    cfg.validate();
    parallel = std::max<std::size_t>(1, std::min(parallel, episodes.size()));
    std::vector<std::optional<EpisodeTrace>> done(episodes.size());
    std::atomic<std::size_t> next{0};
    std::size_t committed = 0;
    std::mutex mu;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= episodes.size()) return;
            try {
                auto backend = make_backend(episodes[i]);
                RunServices svc{backend.get(), retriever, gateway, observer};
                EpisodeTrace trace = run_episode(episodes[i], cfg, svc);
                std::lock_guard lock(mu);
                done[i] = std::move(trace);
                while (committed < done.size() && done[committed]) {
                    sink(episodes[committed], std::move(*done[committed]));
                    done[committed].reset();
                    ++committed;
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = episodes.size();
                return;
            }
        }
    };

    if (parallel == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < parallel; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace dpot
