#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "beamtune/optimizers/bayesian.hpp"
#include "beamtune/optimizers/extremum_seeking.hpp"
#include "beamtune/optimizers/optimizer.hpp"

namespace beamtune {

/// Baseline by name: bo, es, random or do-nothing.
inline std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, std::uint64_t seed, const BoConfig& bo = {},
                                                 const EsConfig& es = {}) {
  if (kind == "bo") return std::make_unique<BayesianOptimization>(seed, bo);
  if (kind == "es") return std::make_unique<ExtremumSeeking>(es);
  if (kind == "random") return std::make_unique<RandomSearch>(seed);
  if (kind == "do-nothing") return std::make_unique<DoNothing>();
  throw std::invalid_argument("unknown optimizer: " + kind);
}

}  // namespace beamtune
