#pragma once

// Bayesian optimization over the normalized actuator box: a Matérn-5/2 GP
// surrogate of the objective and expected improvement (minimization form),
// maximized by quasi-random screening followed by compass-search refinement
// of the best candidates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beamtune/optimizers/gaussian_process.hpp"
#include "beamtune/optimizers/optimizer.hpp"
#include "beamtune/optimizers/quasi_random.hpp"

namespace beamtune {

struct BoConfig {
  int n_init = 5;  // history size below which the initial design is used
  int candidates = 4096;
  int refine_starts = 8;
  int refine_evaluations = 200;
  double refine_initial_step = 0.1;
  double refine_min_step = 1e-3;
  bool log_objective = true;  // fit the GP to log(objective)
  // On the proposal for this step index the best settings seen so far are
  // returned instead of the EI maximizer, so the episode ends on the
  // incumbent. 0 disables.
  int return_best_at_step = 50;
  GpConfig gp;
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Expected improvement below `incumbent`, everything in standardized units.
inline double expected_improvement(const GpPrediction& p, double incumbent) {
  const double sd = std::sqrt(p.variance);
  const double diff = incumbent - p.mean;
  if (sd < 1e-12) return std::max(diff, 0.0);
  const double z = diff / sd;
  return diff * normal_cdf(z) + sd * normal_pdf(z);
}

inline double expected_improvement(const GpModel& model, const Eigen::VectorXd& x, double incumbent) {
  return expected_improvement(model.predict(x), incumbent);
}

class BayesianOptimization final : public Optimizer {
 public:
  explicit BayesianOptimization(std::uint64_t seed, BoConfig cfg = {})
      : cfg_(cfg), seed_(seed), design_(kNumActuators, derive_seed({0x626f2d696e6974ULL, seed})),
        fallback_rng_(derive_seed({0x626f2d66616c6cULL, seed})) {}

  std::string id() const override { return "bo"; }

  MagnetSettings propose(std::span<const Sample> history, const BeamParameters&) override {
    if (history.empty()) throw std::invalid_argument("propose needs a reset sample");
    last_was_fallback_ = false;
    if (cfg_.return_best_at_step > 0 && static_cast<int>(history.size()) == cfg_.return_best_at_step)
      return std::ranges::min(history, {}, &Sample::objective).settings;
    if (static_cast<int>(history.size()) < cfg_.n_init) return from_unit(design_.next());

    Eigen::MatrixXd x(static_cast<Eigen::Index>(history.size()), static_cast<Eigen::Index>(kNumActuators));
    Eigen::VectorXd y(static_cast<Eigen::Index>(history.size()));
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto u = normalize(history[i].settings);
      for (std::size_t d = 0; d < kNumActuators; ++d)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = u[d];
      const double obj = history[i].objective;
      y(static_cast<Eigen::Index>(i)) = cfg_.log_objective ? std::log(std::max(obj, 1e-9)) : obj;
    }

    try {
      GpModel model = gp_fit(x, y, cfg_.gp, warm_);
      warm_ = model.hyperparameters();
      const double incumbent = model.standardized_targets().minCoeff();
      return denormalize(to_array(maximize_ei(model, incumbent)));
    } catch (const GpError&) {
      ++fallbacks_;
      last_was_fallback_ = true;
      std::array<double, kNumActuators> u{};
      for (auto& v : u) v = fallback_rng_.uniform(-1.0, 1.0);
      return denormalize(u);
    }
  }

  /// EI maximizer over [-1, 1]^5; public for testing.
  Eigen::VectorXd maximize_ei(const GpModel& model, double incumbent) {
    ScrambledSobol sobol(kNumActuators, derive_seed({0x626f2d63616e64ULL, seed_, calls_++}));
    struct Scored {
      double ei;
      Eigen::VectorXd x;
    };
    std::vector<Scored> scored;
    scored.reserve(static_cast<std::size_t>(cfg_.candidates));
    for (int i = 0; i < cfg_.candidates; ++i) {
      const auto u = sobol.next();
      Eigen::VectorXd c(static_cast<Eigen::Index>(kNumActuators));
      for (std::size_t d = 0; d < kNumActuators; ++d) c(static_cast<Eigen::Index>(d)) = 2.0 * u[d] - 1.0;
      scored.push_back({expected_improvement(model, c, incumbent), std::move(c)});
    }
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(cfg_.refine_starts), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(),
                      [](const Scored& a, const Scored& b) { return a.ei > b.ei; });

    Scored best = scored.front();
    for (std::size_t s = 0; s < top; ++s) {
      auto refined = refine(model, incumbent, scored[s].x, scored[s].ei);
      if (refined.ei > best.ei) best = {refined.ei, refined.x};
    }
    return best.x;
  }

  int fallback_count() const { return fallbacks_; }
  bool last_was_fallback() const { return last_was_fallback_; }

 private:
  struct Refined {
    double ei;
    Eigen::VectorXd x;
  };

  /// Compass search on EI, step halving, confined to the box.
  Refined refine(const GpModel& model, double incumbent, Eigen::VectorXd x, double ei) const {
    double step = cfg_.refine_initial_step;
    int evals = 0;
    while (step >= cfg_.refine_min_step && evals < cfg_.refine_evaluations) {
      bool improved = false;
      for (Eigen::Index d = 0; d < x.size() && evals < cfg_.refine_evaluations; ++d) {
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd c = x;
          c(d) = std::clamp(c(d) + sign * step, -1.0, 1.0);
          if (c(d) == x(d)) continue;
          const double v = expected_improvement(model, c, incumbent);
          ++evals;
          if (v > ei) {
            ei = v;
            x = std::move(c);
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    return {ei, std::move(x)};
  }

  static MagnetSettings from_unit(const std::vector<double>& u) {
    std::array<double, kNumActuators> v{};
    for (std::size_t d = 0; d < kNumActuators; ++d) v[d] = 2.0 * u[d] - 1.0;
    return denormalize(v);
  }

  static std::array<double, kNumActuators> to_array(const Eigen::VectorXd& x) {
    std::array<double, kNumActuators> v{};
    for (std::size_t d = 0; d < kNumActuators; ++d) v[d] = x(static_cast<Eigen::Index>(d));
    return v;
  }

  BoConfig cfg_;
  std::uint64_t seed_;
  ScrambledSobol design_;
  Rng fallback_rng_;
  std::optional<GpHyperparameters> warm_;
  std::uint64_t calls_ = 0;
  int fallbacks_ = 0;
  bool last_was_fallback_ = false;
};

}  // namespace beamtune
