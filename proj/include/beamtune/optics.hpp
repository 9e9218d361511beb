#pragma once

// Linear transport of a Gaussian beam (first and second moments) through
// the Q1-Q2-CV-Q3-CH section onto a diagnostic screen.
//
// Internal units are SI: metres for positions and lengths, radians for
// slopes and kick angles. Phase-space ordering is (x, x', y, y').

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "beamtune/random.hpp"
#include "beamtune/units.hpp"

namespace beamtune {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct Offset {
  double dx = 0.0;  // m
  double dy = 0.0;  // m

  friend bool operator==(const Offset&, const Offset&) = default;
};

struct TransverseState {
  Vec4 mean = Vec4::Zero();
  Mat4 covariance = Mat4::Zero();

  static TransverseState gaussian(const Vec4& mean, const Vec4& rms) {
    TransverseState s;
    s.mean = mean;
    s.covariance = rms.cwiseProduct(rms).asDiagonal();
    return s;
  }
};

/// Affine phase-space map v -> R v + d.
struct AffineMap {
  Mat4 R = Mat4::Identity();
  Vec4 d = Vec4::Zero();

  static AffineMap identity() { return {}; }

  /// Map that applies `first`, then `*this`.
  AffineMap after(const AffineMap& first) const {
    return {R * first.R, R * first.d + d};
  }

  Vec4 apply(const Vec4& v) const { return R * v + d; }

  TransverseState apply(const TransverseState& s) const {
    TransverseState out;
    out.mean = apply(s.mean);
    out.covariance = R * s.covariance * R.transpose();
    // Keep exact symmetry; R Σ Rᵀ can drift by an ulp off the diagonal.
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
  }
};

enum class Plane { horizontal, vertical };

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

/// 2x2 transfer block of a thick quadrupole for one plane with strength k (m^-2).
inline Eigen::Matrix2d quad_plane_block(double k, double length) {
  Eigen::Matrix2d m;
  if (k == 0.0) {
    m << 1.0, length, 0.0, 1.0;
  } else if (k > 0.0) {
    const double sk = std::sqrt(k);
    const double phi = sk * length;
    m << std::cos(phi), std::sin(phi) / sk, -sk * std::sin(phi), std::cos(phi);
  } else {
    const double sk = std::sqrt(-k);
    const double phi = sk * length;
    m << std::cosh(phi), std::sinh(phi) / sk, sk * std::sinh(phi), std::cosh(phi);
  }
  return m;
}

}  // namespace detail

inline AffineMap drift_map(double length) {
  detail::require_finite(length, "drift length");
  if (length < 0.0) throw std::invalid_argument("drift length must be >= 0");
  AffineMap m;
  m.R(0, 1) = length;
  m.R(2, 3) = length;
  return m;
}

/// Thick quadrupole. Positive k1 focuses horizontally and defocuses
/// vertically. A transverse misalignment shifts the magnet frame, which
/// turns into a dipole kick (feed-down) for a beam off the magnetic axis.
inline AffineMap quad_map(double k1, double length, Offset misalignment = {}) {
  detail::require_finite(k1, "k1");
  detail::require_finite(length, "quadrupole length");
  detail::require_finite(misalignment.dx, "quadrupole dx");
  detail::require_finite(misalignment.dy, "quadrupole dy");
  if (!(length > 0.0)) throw std::invalid_argument("quadrupole length must be > 0");

  AffineMap m;
  m.R.setZero();
  m.R.block<2, 2>(0, 0) = detail::quad_plane_block(k1, length);
  m.R.block<2, 2>(2, 2) = detail::quad_plane_block(-k1, length);
  const Vec4 axis(misalignment.dx, 0.0, misalignment.dy, 0.0);
  m.d = (Mat4::Identity() - m.R) * axis;
  return m;
}

/// Thin steering kick. Positive angles move the beam towards +x (right)
/// or +y (up) downstream.
inline AffineMap corrector_map(double angle, Plane plane) {
  detail::require_finite(angle, "corrector angle");
  AffineMap m;
  m.d(plane == Plane::horizontal ? 1 : 3) = angle;
  return m;
}

enum class ElementKind { drift, quadrupole, h_corrector, v_corrector, screen };

inline std::string_view to_string(ElementKind k) {
  switch (k) {
    case ElementKind::drift: return "drift";
    case ElementKind::quadrupole: return "quadrupole";
    case ElementKind::h_corrector: return "h-corrector";
    case ElementKind::v_corrector: return "v-corrector";
    case ElementKind::screen: return "screen";
  }
  return "?";
}

inline ElementKind element_kind_from_string(std::string_view s) {
  if (s == "drift") return ElementKind::drift;
  if (s == "quadrupole") return ElementKind::quadrupole;
  if (s == "h-corrector") return ElementKind::h_corrector;
  if (s == "v-corrector") return ElementKind::v_corrector;
  if (s == "screen") return ElementKind::screen;
  throw std::invalid_argument("unknown lattice element kind: " + std::string(s));
}

struct LatticeElement {
  std::string name;
  ElementKind kind = ElementKind::drift;
  double length = 0.0;  // m
  Offset misalignment;
};

/// Magnet strengths in SI, in beamline order.
struct ActuatorValues {
  std::array<double, 3> quad_k1{};  // m^-2, Q1 Q2 Q3
  double cv = 0.0;                  // rad
  double ch = 0.0;                  // rad
};

class Lattice {
 public:
  Lattice() = default;

  explicit Lattice(std::vector<LatticeElement> elements) : elements_(std::move(elements)) {
    validate();
  }

  /// Drift spacings modelled on the ARES experimental area (~2.5 m total).
  static Lattice default_section() {
    return Lattice({
        {"D0", ElementKind::drift, 0.175, {}},
        {"Q1", ElementKind::quadrupole, 0.122, {}},
        {"D1", ElementKind::drift, 0.428, {}},
        {"Q2", ElementKind::quadrupole, 0.122, {}},
        {"D2", ElementKind::drift, 0.204, {}},
        {"CV", ElementKind::v_corrector, 0.0, {}},
        {"D3", ElementKind::drift, 0.204, {}},
        {"Q3", ElementKind::quadrupole, 0.122, {}},
        {"D4", ElementKind::drift, 0.179, {}},
        {"CH", ElementKind::h_corrector, 0.0, {}},
        {"D5", ElementKind::drift, 0.944, {}},
        {"SCREEN", ElementKind::screen, 0.0, {}},
    });
  }

  const std::vector<LatticeElement>& elements() const { return elements_; }

  /// Copy with the three quadrupoles and the screen displaced.
  Lattice with_misalignments(const std::array<Offset, 3>& quads, Offset screen) const {
    Lattice out = *this;
    std::size_t q = 0;
    for (auto& e : out.elements_) {
      if (e.kind == ElementKind::quadrupole) e.misalignment = quads[q++];
      if (e.kind == ElementKind::screen) e.misalignment = screen;
    }
    return out;
  }

  Offset screen_misalignment() const {
    for (const auto& e : elements_)
      if (e.kind == ElementKind::screen) return e.misalignment;
    return {};
  }

  double total_length() const {
    double s = 0.0;
    for (const auto& e : elements_) s += e.length;
    return s;
  }

  /// Longitudinal position of the entrance of element `index`.
  double position_of(std::size_t index) const {
    double s = 0.0;
    for (std::size_t i = 0; i < index && i < elements_.size(); ++i) s += elements_[i].length;
    return s;
  }

  std::size_t index_of(ElementKind kind, std::size_t nth = 0) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
      if (elements_[i].kind == kind && nth-- == 0) return i;
    throw std::out_of_range("lattice has no such element");
  }

  /// Composite map from the section entrance to the screen plane.
  AffineMap transfer_map(const ActuatorValues& act) const {
    AffineMap total;
    std::size_t q = 0;
    for (const auto& e : elements_) {
      AffineMap m;
      switch (e.kind) {
        case ElementKind::drift: m = drift_map(e.length); break;
        case ElementKind::quadrupole: m = quad_map(act.quad_k1[q++], e.length, e.misalignment); break;
        case ElementKind::v_corrector: m = corrector_map(act.cv, Plane::vertical); break;
        case ElementKind::h_corrector: m = corrector_map(act.ch, Plane::horizontal); break;
        case ElementKind::screen: return total;
      }
      total = m.after(total);
    }
    return total;
  }

 private:
  void validate() const {
    static constexpr std::array<ElementKind, 6> order{
        ElementKind::quadrupole, ElementKind::quadrupole, ElementKind::v_corrector,
        ElementKind::quadrupole, ElementKind::h_corrector, ElementKind::screen};
    std::size_t next = 0;
    for (const auto& e : elements_) {
      if (!std::isfinite(e.length) || e.length < 0.0)
        throw std::invalid_argument("lattice element '" + e.name + "' has invalid length");
      if (e.kind == ElementKind::drift) continue;
      if (next >= order.size() || e.kind != order[next])
        throw std::invalid_argument("lattice elements must be ordered Q1, Q2, CV, Q3, CH, screen");
      if (e.kind == ElementKind::quadrupole && !(e.length > 0.0))
        throw std::invalid_argument("quadrupole '" + e.name + "' must have positive length");
      if (e.kind != ElementKind::quadrupole && e.length != 0.0)
        throw std::invalid_argument("'" + e.name + "' is a thin element and must have length 0");
      ++next;
    }
    if (next != order.size())
      throw std::invalid_argument("lattice elements must be ordered Q1, Q2, CV, Q3, CH, screen");
  }

  std::vector<LatticeElement> elements_;
};

/// State at the screen plane. Range checks are the caller's business.
inline TransverseState track(const Lattice& lattice, const ActuatorValues& act,
                             const TransverseState& incoming) {
  return lattice.transfer_map(act).apply(incoming);
}

/// Beam parameters as read off the screen, in millimetres.
struct BeamParameters {
  double mu_x = 0.0;
  double sigma_x = 0.0;
  double mu_y = 0.0;
  double sigma_y = 0.0;

  friend bool operator==(const BeamParameters&, const BeamParameters&) = default;
};

class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Analytic moment readout standing in for a 2D Gaussian fit of the
/// camera image. Noise (if any) is added to the positions only.
inline BeamParameters read_screen(const TransverseState& state, Offset screen_misalignment,
                                  double noise_sigma_m, Rng* rng) {
  const double vx = state.covariance(0, 0);
  const double vy = state.covariance(2, 2);
  if (vx < 0.0 || vy < 0.0 || !std::isfinite(vx) || !std::isfinite(vy))
    throw ConsistencyError("beam covariance has a negative or non-finite diagonal");
  double nx = 0.0, ny = 0.0;
  if (noise_sigma_m > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("screen noise requires an rng");
    nx = noise_sigma_m * rng->normal();
    ny = noise_sigma_m * rng->normal();
  }
  BeamParameters p;
  p.mu_x = units::m_to_mm(state.mean(0) - screen_misalignment.dx + nx);
  p.mu_y = units::m_to_mm(state.mean(2) - screen_misalignment.dy + ny);
  p.sigma_x = units::m_to_mm(std::sqrt(vx));
  p.sigma_y = units::m_to_mm(std::sqrt(vy));
  return p;
}

}  // namespace beamtune
