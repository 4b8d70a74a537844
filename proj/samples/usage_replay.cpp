// Library walkthrough: build a small synthetic dataset, replay it under
// dynamic planning with a scripted model, and print the score table.
//
//   ./usage_replay [episodes] [seed]

#include <cstdlib>
#include <iostream>

#include "dpot/reporting.hpp"
#include "dpot/scripts.hpp"
#include "dpot/synthetic.hpp"

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 10;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;

    const dpot::Dataset ds = dpot::generate_synthetic(seed, n);

    dpot::RunConfig cfg;
    cfg.strategy = {dpot::Strategy::Kind::DPoT, {}};

    // A model that always proposes the recorded action.
    auto book = std::make_shared<dpot::ScriptBook>(dpot::script_book(ds.episodes, cfg.strategy, cfg.grounding));

    std::vector<dpot::EpisodeTrace> traces;
    dpot::run_episodes(ds.episodes, cfg, dpot::scripted_factory(book), nullptr, {}, 1,
                       [&](const dpot::Episode&, dpot::EpisodeTrace t) { traces.push_back(std::move(t)); });

    const auto& first = traces.front();
    std::cout << "episode " << first.episode_id << ", turn 0\n"
              << "  plan: " << first.turns[0].plan->raw << "\n"
              << "  step: " << first.turns[0].step->text << "\n"
              << "  history: " << first.turns[0].history_entry << "\n\n";

    std::cout << dpot::render_report(dpot::build_report(traces, ds.episodes), dpot::ReportFormat::Text);
    return 0;
}
