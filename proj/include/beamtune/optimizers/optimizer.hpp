#pragma once

// Common proposal interface for the baseline strategies. Baselines see only
// the scalar objective of each sample; they are black-box function
// optimizers over the actuator box.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "beamtune/random.hpp"
#include "beamtune/task.hpp"

namespace beamtune {

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual std::string id() const = 0;

  /// Next absolute settings given the history so far (history[0] is the
  /// reset measurement). Must return finite values; the environment clamps.
  virtual MagnetSettings propose(std::span<const Sample> history, const BeamParameters& target) = 0;
};

/// Keeps the initial settings for the whole episode.
class DoNothing final : public Optimizer {
 public:
  std::string id() const override { return "do-nothing"; }

  MagnetSettings propose(std::span<const Sample> history, const BeamParameters&) override {
    if (history.empty()) throw std::invalid_argument("propose needs a reset sample");
    return history.front().settings;
  }
};

class RandomSearch final : public Optimizer {
 public:
  explicit RandomSearch(std::uint64_t seed) : rng_(derive_seed({0x72616e64ULL, seed})) {}

  std::string id() const override { return "random"; }

  MagnetSettings propose(std::span<const Sample> history, const BeamParameters&) override {
    if (history.empty()) throw std::invalid_argument("propose needs a reset sample");
    std::array<double, kNumActuators> u{};
    for (auto& v : u) v = rng_.uniform(-1.0, 1.0);
    return denormalize(u);
  }

 private:
  Rng rng_;
};

/// Learned-optimizer hook: wraps an externally supplied policy. No trained
/// policy ships with the library.
class PolicyOptimizer final : public Optimizer {
 public:
  using Policy = std::function<MagnetSettings(std::span<const Sample>, const BeamParameters&)>;

  PolicyOptimizer(std::string name, Policy policy) : name_(std::move(name)), policy_(std::move(policy)) {
    if (!policy_) throw std::invalid_argument("PolicyOptimizer needs a policy");
  }

  std::string id() const override { return "policy:" + name_; }

  MagnetSettings propose(std::span<const Sample> history, const BeamParameters& target) override {
    if (history.empty()) throw std::invalid_argument("propose needs a reset sample");
    return policy_(history, target);
  }

 private:
  std::string name_;
  Policy policy_;
};

}  // namespace beamtune
