#pragma once

// Bounded-update extremum seeking. Each normalized actuator dithers at its
// own frequency; the measured cost enters the phase of the dither, so on
// average the parameters descend the cost gradient:
//
//   u_j <- u_j + dt * sqrt(a * w_j) * cos(w_j * t + k * C)
//
// with C the latest objective divided by the objective at reset.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "beamtune/optimizers/optimizer.hpp"

namespace beamtune {

struct EsConfig {
  std::array<double, kNumActuators> omega = default_omega();
  double dt = 1.0;
  double amplitude = 0.05 * 0.05;  // a
  double gain = 12.0;              // k
  bool clip_to_box = true;

  /// Distinct, irrationally related dither frequencies in rad per unit
  /// time, all well below the Nyquist limit of a unit step.
  static std::array<double, kNumActuators> default_omega() {
    std::array<double, kNumActuators> w{};
    for (std::size_t j = 0; j < kNumActuators; ++j)
      w[j] = 0.5 + 0.1 * std::numbers::sqrt2 * static_cast<double>(j);
    return w;
  }

  double omega_max() const {
    double m = 0.0;
    for (double w : omega) m = std::max(m, w);
    return m;
  }

  /// Largest possible per-step change of one normalized coordinate.
  double max_step() const { return dt * std::sqrt(amplitude * omega_max()); }

  void validate() const {
    if (!(dt > 0.0) || !(amplitude >= 0.0) || !std::isfinite(gain))
      throw std::invalid_argument("invalid extremum seeking parameters");
    for (double w : omega)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("ES frequencies must be positive");
  }
};

class ExtremumSeeking final : public Optimizer {
 public:
  explicit ExtremumSeeking(EsConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  std::string id() const override { return "es"; }

  MagnetSettings propose(std::span<const Sample> history, const BeamParameters&) override {
    if (history.empty()) throw std::invalid_argument("propose needs a reset sample");
    if (!started_) {
      u_ = normalize(history.back().settings);
      scale_ = history.front().objective > 0.0 ? history.front().objective : 1.0;
      started_ = true;
    }
    const double cost = history.back().objective / scale_;
    step(cost);
    return denormalize(u_);
  }

  /// One update on an arbitrary normalized cost; exposed for toy problems.
  const std::array<double, kNumActuators>& step(double cost) {
    for (std::size_t j = 0; j < kNumActuators; ++j) {
      const double w = cfg_.omega[j];
      u_[j] += cfg_.dt * std::sqrt(cfg_.amplitude * w) * std::cos(w * t_ + cfg_.gain * cost);
      if (cfg_.clip_to_box) u_[j] = std::clamp(u_[j], -1.0, 1.0);
    }
    t_ += cfg_.dt;
    return u_;
  }

  void set_position(const std::array<double, kNumActuators>& u) {
    u_ = u;
    started_ = true;
    scale_ = 1.0;
  }

  const std::array<double, kNumActuators>& position() const { return u_; }
  double time() const { return t_; }
  const EsConfig& config() const { return cfg_; }

 private:
  EsConfig cfg_;
  std::array<double, kNumActuators> u_{};
  double t_ = 0.0;
  double scale_ = 1.0;
  bool started_ = false;
};

}  // namespace beamtune
