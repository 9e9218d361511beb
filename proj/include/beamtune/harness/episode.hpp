#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "beamtune/harness/agent.hpp"
#include "beamtune/task.hpp"

namespace beamtune::harness {

inline constexpr int kDefaultBudget = 50;

struct RunRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;  // run seed within the trial
  std::string optimizer_id;
  bool is_llm = false;
  int budget = kDefaultBudget;
  std::vector<Sample> samples;  // samples[0] is the reset measurement
  std::vector<TranscriptEntry> transcripts;
  Termination termination = Termination::budget_exhausted;
  std::string termination_detail;
  std::array<int, kNumActuators> clamp_counts{};
  std::vector<double> step_wall_s;
  int iterations_started = 0;
  int second_attempts = 0;

  int steps_taken() const { return static_cast<int>(samples.size()) - 1; }
  int model_calls() const { return static_cast<int>(transcripts.size()); }
  /// Iterations whose proposal was applied, excluding second attempts.
  int successful_steps() const { return steps_taken(); }
};

/// Resets `env` to `trial` and runs until the budget is spent or the agent
/// stops. Final settings are whatever was applied last.
inline RunRecord run_episode(const Trial& trial, Agent& agent, Environment& env, int budget = kDefaultBudget,
                             std::uint64_t seed = 0) {
  if (budget < 0) throw std::invalid_argument("budget must be non-negative");
  RunRecord rec;
  rec.trial_id = trial.trial_id;
  rec.seed = seed;
  rec.optimizer_id = agent.id();
  rec.is_llm = agent.is_llm();
  rec.budget = budget;
  env.reset(trial);

  for (int step = 1; step <= budget; ++step) {
    const auto start = std::chrono::steady_clock::now();
    ++rec.iterations_started;
    auto outcome = agent.next(env.history(), trial.target, step);
    rec.second_attempts += outcome.second_attempts;
    for (auto& c : outcome.calls) rec.transcripts.push_back(std::move(c));
    if (!outcome.settings) {
      rec.termination = outcome.termination;
      rec.termination_detail = std::move(outcome.detail);
      rec.step_wall_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      break;
    }
    const auto& applied = env.step(*outcome.settings);
    for (std::size_t i = 0; i < kNumActuators; ++i) rec.clamp_counts[i] += applied.clamped[i] ? 1 : 0;
    rec.step_wall_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  rec.samples = env.history();
  return rec;
}

}  // namespace beamtune::harness
