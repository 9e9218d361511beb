#pragma once

#include <boost/random/sobol.hpp>

#include <cstdint>
#include <vector>

#include "beamtune/random.hpp"

namespace beamtune {

/// Digitally shifted Sobol sequence on [0, 1)^dim. The XOR shift keeps the
/// net structure of the sequence while decorrelating streams with different
/// seeds. Boost's engine starts after the origin, so the origin is emitted
/// first to keep every leading block of 2^m points a complete net.
class ScrambledSobol {
 public:
  ScrambledSobol(std::size_t dim, std::uint64_t seed) : engine_(dim), shifts_(dim) {
    Rng rng(derive_seed({0x736f626f6cULL, seed}));
    for (auto& s : shifts_) s = rng.next_u64();
  }

  std::size_t dimension() const { return shifts_.size(); }

  std::vector<double> next() {
    std::vector<double> u(shifts_.size());
    for (std::size_t d = 0; d < u.size(); ++d) {
      const std::uint64_t raw = started_ ? static_cast<std::uint64_t>(engine_()) : 0;
      const std::uint64_t x = raw ^ shifts_[d];
      u[d] = static_cast<double>(x >> 11) * 0x1.0p-53;
    }
    started_ = true;
    return u;
  }

 private:
  boost::random::sobol engine_;
  std::vector<std::uint64_t> shifts_;
  bool started_ = false;
};

}  // namespace beamtune
