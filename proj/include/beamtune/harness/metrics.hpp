#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtune/harness/episode.hpp"

namespace beamtune::harness {

/// Minimum improvement of the MAE for a run to count as successful, in mm.
inline constexpr double kSuccessThresholdMm = 0.040;

struct RunMetrics {
  double mae_initial_mm = 0.0;
  double mae_final_mm = 0.0;
  double final_beam_difference_um = 0.0;
  std::optional<double> normalized_improvement_pct;    // empty if mae_initial = 0
  std::optional<double> normalized_integrated_mae_pct;  // empty if mae_initial = 0
  int successful_steps = 0;
  bool run_success = false;
  bool fill_applied = false;  // integrated MAE held the last value past early termination
};

inline bool is_run_success(double mae_initial_mm, double mae_final_mm) {
  return mae_initial_mm - mae_final_mm >= kSuccessThresholdMm;
}

inline RunMetrics compute_metrics(const RunRecord& run) {
  if (run.samples.empty()) throw std::invalid_argument("run has no samples");
  RunMetrics m;
  m.mae_initial_mm = run.samples.front().mae;
  m.mae_final_mm = run.samples.back().mae;
  m.final_beam_difference_um = m.mae_final_mm * 1000.0;
  m.successful_steps = run.successful_steps();
  m.run_success = is_run_success(m.mae_initial_mm, m.mae_final_mm);

  // Ratios to the initial MAE are summed so an unchanged beam gives exactly 100 %.
  double ratio_sum = 0.0;
  for (int t = 1; t <= run.budget; ++t) {
    const double v = t < static_cast<int>(run.samples.size()) ? run.samples[t].mae : run.samples.back().mae;
    if (t >= static_cast<int>(run.samples.size())) m.fill_applied = true;
    if (m.mae_initial_mm > 0.0) ratio_sum += v / m.mae_initial_mm;
  }
  if (m.mae_initial_mm > 0.0) {
    m.normalized_improvement_pct = 100.0 * (m.mae_final_mm - m.mae_initial_mm) / m.mae_initial_mm;
    if (run.budget > 0) m.normalized_integrated_mae_pct = 100.0 * ratio_sum / run.budget;
  }
  return m;
}

struct SuccessTiers {
  bool outright = false;      // every run
  bool partial = false;       // at least two thirds of the runs
  bool single_trial = false;  // every run of some trial
};

struct RunOutcome {
  int trial_id = 0;
  bool success = false;
};

inline SuccessTiers classify_tiers(std::span<const RunOutcome> runs) {
  SuccessTiers t;
  if (runs.empty()) return t;
  std::size_t successes = 0;
  std::map<int, std::pair<std::size_t, std::size_t>> per_trial;  // (runs, successes)
  for (const auto& r : runs) {
    successes += r.success ? 1 : 0;
    auto& [n, s] = per_trial[r.trial_id];
    ++n;
    s += r.success ? 1 : 0;
  }
  t.outright = successes == runs.size();
  t.partial = 3 * successes >= 2 * runs.size();
  for (const auto& [id, ns] : per_trial)
    if (ns.first > 0 && ns.first == ns.second) t.single_trial = true;
  return t;
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // population
  std::size_t n = 0;
};

inline std::optional<Stat> mean_sd(std::span<const double> v) {
  if (v.empty()) return std::nullopt;
  Stat s;
  s.n = v.size();
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

struct RunSummary {
  int trial_id = 0;
  std::uint64_t seed = 0;
  Termination termination = Termination::budget_exhausted;
  RunMetrics metrics;
};

struct SuiteSummary {
  std::string optimizer_id;
  bool is_llm = false;
  std::vector<RunSummary> runs;
  std::optional<Stat> final_beam_difference_um;
  std::optional<Stat> normalized_improvement_pct;
  std::optional<Stat> normalized_integrated_mae_pct;
  std::optional<Stat> successful_steps;  // only for LLM optimizers
  int successful_runs = 0;
  int undefined_normalized = 0;  // runs excluded from the normalized means
  int fill_applied = 0;
  int transport_failures = 0;
  int double_parse_failures = 0;
  SuccessTiers tiers;
};

inline SuiteSummary summarize(std::span<const RunRecord> records) {
  SuiteSummary s;
  if (!records.empty()) {
    s.optimizer_id = records.front().optimizer_id;
    s.is_llm = records.front().is_llm;
  }
  std::vector<double> fbd, imp, integ, steps;
  std::vector<RunOutcome> outcomes;
  for (const auto& r : records) {
    if (r.optimizer_id != s.optimizer_id) throw std::invalid_argument("summary mixes optimizers");
    RunSummary rs{r.trial_id, r.seed, r.termination, compute_metrics(r)};
    fbd.push_back(rs.metrics.final_beam_difference_um);
    if (rs.metrics.normalized_improvement_pct) imp.push_back(*rs.metrics.normalized_improvement_pct);
    else ++s.undefined_normalized;
    if (rs.metrics.normalized_integrated_mae_pct) integ.push_back(*rs.metrics.normalized_integrated_mae_pct);
    steps.push_back(rs.metrics.successful_steps);
    s.successful_runs += rs.metrics.run_success ? 1 : 0;
    s.fill_applied += rs.metrics.fill_applied ? 1 : 0;
    s.transport_failures += r.termination == Termination::transport_failure ? 1 : 0;
    s.double_parse_failures += r.termination == Termination::double_parse_failure ? 1 : 0;
    outcomes.push_back({r.trial_id, rs.metrics.run_success});
    s.runs.push_back(std::move(rs));
  }
  s.final_beam_difference_um = mean_sd(fbd);
  s.normalized_improvement_pct = mean_sd(imp);
  s.normalized_integrated_mae_pct = mean_sd(integ);
  if (s.is_llm) s.successful_steps = mean_sd(steps);
  s.tiers = classify_tiers(outcomes);
  return s;
}

}  // namespace beamtune::harness
