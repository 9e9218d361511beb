#pragma once

// Evaluation protocol: every trial is run once per run seed. Runs are
// independent and may execute on several worker threads; all randomness is
// derived from (trial seed, run seed), so results do not depend on the
// worker count.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "beamtune/harness/episode.hpp"
#include "beamtune/harness/metrics.hpp"
#include "beamtune/optics.hpp"
#include "beamtune/random.hpp"

namespace beamtune::harness {

struct RunContext {
  const Trial* trial = nullptr;
  std::uint64_t run_seed = 0;
  std::uint64_t optimizer_seed = 0;
};

using AgentFactory = std::function<std::unique_ptr<Agent>(const RunContext&)>;

struct EvaluationConfig {
  int seeds = 3;
  int budget = kDefaultBudget;
  int workers = 1;
  Lattice lattice = Lattice::default_section();
  NoiseConfig noise;
};

inline std::uint64_t optimizer_seed(const Trial& t, std::uint64_t run_seed) { return derive_seed({t.seed, run_seed}); }

inline std::uint64_t noise_seed(const Trial& t, std::uint64_t run_seed) {
  return derive_seed({t.seed, run_seed, 0x6e6f697365ULL});
}

struct EvaluationResult {
  std::vector<RunRecord> records;  // trial-major, then run seed
  SuiteSummary summary;
};

inline EvaluationResult evaluate(const std::vector<Trial>& trials, const AgentFactory& factory,
                                 const EvaluationConfig& cfg) {
  if (cfg.seeds < 1) throw std::invalid_argument("need at least one seed");
  if (!factory) throw std::invalid_argument("evaluate needs an agent factory");
  const std::size_t total = trials.size() * static_cast<std::size_t>(cfg.seeds);
  std::vector<RunRecord> records(total);

  auto run_one = [&](std::size_t i) {
    const Trial& trial = trials[i / cfg.seeds];
    const std::uint64_t run_seed = i % cfg.seeds;
    RunContext ctx{&trial, run_seed, optimizer_seed(trial, run_seed)};
    auto agent = factory(ctx);
    Environment env(cfg.lattice, cfg.noise, noise_seed(trial, run_seed));
    records[i] = run_episode(trial, *agent, env, cfg.budget, run_seed);
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.workers, 1)), 1, std::max<std::size_t>(total, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < total;) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  EvaluationResult out;
  out.records = std::move(records);
  out.summary = summarize(out.records);
  return out;
}

}  // namespace beamtune::harness
