#pragma once

// The transverse tuning task: actuator box, trials, objective, and the
// reset/step environment wrapping the optics model.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtune/optics.hpp"
#include "beamtune/random.hpp"
#include "beamtune/units.hpp"

namespace beamtune {

inline constexpr double kQuadLimit = 30.0;      // m^-2
inline constexpr double kCorrectorLimit = 6e-3; // rad
inline constexpr std::size_t kNumActuators = 5;

/// Actuator names in the order (Q1, Q2, CV, Q3, CH).
inline constexpr std::array<const char*, kNumActuators> kActuatorNames{"Q1", "Q2", "CV", "Q3", "CH"};

/// Magnet settings in SI: quadrupole k1 in m^-2, corrector angles in rad.
struct MagnetSettings {
  double q1 = 0.0;
  double q2 = 0.0;
  double cv = 0.0;
  double q3 = 0.0;
  double ch = 0.0;

  friend bool operator==(const MagnetSettings&, const MagnetSettings&) = default;

  std::array<double, kNumActuators> as_array() const { return {q1, q2, cv, q3, ch}; }

  static MagnetSettings from_array(const std::array<double, kNumActuators>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }

  /// The same settings with corrector angles in mrad, as shown to operators.
  std::array<double, kNumActuators> display_units() const {
    return {q1, q2, units::rad_to_mrad(cv), q3, units::rad_to_mrad(ch)};
  }

  static MagnetSettings from_display_units(const std::array<double, kNumActuators>& a) {
    return {a[0], a[1], units::mrad_to_rad(a[2]), a[3], units::mrad_to_rad(a[4])};
  }

  bool all_finite() const {
    for (double v : as_array())
      if (!std::isfinite(v)) return false;
    return true;
  }

  ActuatorValues actuators() const { return {{q1, q2, q3}, cv, ch}; }
};

inline std::array<double, kNumActuators> actuator_limits() {
  return {kQuadLimit, kQuadLimit, kCorrectorLimit, kQuadLimit, kCorrectorLimit};
}

inline bool within_ranges(const MagnetSettings& s) {
  const auto v = s.as_array();
  const auto lim = actuator_limits();
  for (std::size_t i = 0; i < kNumActuators; ++i)
    if (!(std::abs(v[i]) <= lim[i])) return false;
  return true;
}

using ClampFlags = std::array<bool, kNumActuators>;

struct ClampResult {
  MagnetSettings settings;
  ClampFlags clamped{};

  bool any() const { return std::ranges::any_of(clamped, [](bool b) { return b; }); }
};

inline ClampResult clamp_to_ranges(const MagnetSettings& s) {
  auto v = s.as_array();
  const auto lim = actuator_limits();
  ClampResult r;
  for (std::size_t i = 0; i < kNumActuators; ++i) {
    const double c = std::clamp(v[i], -lim[i], lim[i]);
    r.clamped[i] = c != v[i];
    v[i] = c;
  }
  r.settings = MagnetSettings::from_array(v);
  return r;
}

/// Maps settings into [-1, 1]^5 using the actuator ranges.
inline std::array<double, kNumActuators> normalize(const MagnetSettings& s) {
  auto v = s.as_array();
  const auto lim = actuator_limits();
  for (std::size_t i = 0; i < kNumActuators; ++i) v[i] /= lim[i];
  return v;
}

inline MagnetSettings denormalize(const std::array<double, kNumActuators>& u) {
  auto v = u;
  const auto lim = actuator_limits();
  for (std::size_t i = 0; i < kNumActuators; ++i) v[i] *= lim[i];
  return MagnetSettings::from_array(v);
}

/// Sum of absolute differences over (mu_x, mu_y, sigma_x, sigma_y), in mm.
inline double objective(const BeamParameters& observed, const BeamParameters& target) {
  return std::abs(observed.mu_x - target.mu_x) + std::abs(observed.mu_y - target.mu_y) +
         std::abs(observed.sigma_x - target.sigma_x) + std::abs(observed.sigma_y - target.sigma_y);
}

inline double mae(const BeamParameters& observed, const BeamParameters& target) {
  return objective(observed, target) / 4.0;
}

/// One problem instance. All fields are SI except `target`, which is in mm
/// like every other externally visible beam parameter.
struct Trial {
  int trial_id = 0;
  std::uint64_t seed = 0;
  BeamParameters target;
  TransverseState incoming;
  std::array<Offset, 3> quad_misalignments{};
  Offset screen_misalignment;
  MagnetSettings initial_settings;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling ranges for make_trial. Lengths in m, slopes in rad.
struct TrialGeneratorConfig {
  Range target_position{-2.0e-3, 2.0e-3};
  Range target_size{0.05e-3, 0.5e-3};
  Range misalignment{-0.5e-3, 0.5e-3};
  Range incoming_position{-0.5e-3, 0.5e-3};
  Range incoming_slope{-0.1e-3, 0.1e-3};
  Range incoming_size{0.1e-3, 0.5e-3};
  Range incoming_divergence{0.05e-3, 0.2e-3};

  void validate() const {
    auto check = [](const Range& r, const char* name, bool positive) {
      if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || (positive && r.lo <= 0.0))
        throw std::invalid_argument(std::string("malformed trial generator range: ") + name);
    };
    check(target_position, "target_position", false);
    check(target_size, "target_size", true);
    check(misalignment, "misalignment", false);
    check(incoming_position, "incoming_position", false);
    check(incoming_slope, "incoming_slope", false);
    check(incoming_size, "incoming_size", true);
    check(incoming_divergence, "incoming_divergence", true);
  }
};

/// Deterministic trial from a seed. The draw order is part of the fixture
/// contract; changing it changes every generated trial.
inline Trial make_trial(std::uint64_t seed, const TrialGeneratorConfig& cfg = {}, int trial_id = 0) {
  cfg.validate();
  Rng rng(derive_seed({0x7472'6961'6cULL, seed}));
  auto draw = [&](const Range& r) { return rng.uniform(r.lo, r.hi); };

  Trial t;
  t.trial_id = trial_id;
  t.seed = seed;
  t.target.mu_x = units::m_to_mm(draw(cfg.target_position));
  t.target.sigma_x = units::m_to_mm(draw(cfg.target_size));
  t.target.mu_y = units::m_to_mm(draw(cfg.target_position));
  t.target.sigma_y = units::m_to_mm(draw(cfg.target_size));

  for (auto& q : t.quad_misalignments) {
    q.dx = draw(cfg.misalignment);
    q.dy = draw(cfg.misalignment);
  }
  t.screen_misalignment.dx = draw(cfg.misalignment);
  t.screen_misalignment.dy = draw(cfg.misalignment);

  Vec4 mean(draw(cfg.incoming_position), draw(cfg.incoming_slope), draw(cfg.incoming_position),
            draw(cfg.incoming_slope));
  Vec4 rms(draw(cfg.incoming_size), draw(cfg.incoming_divergence), draw(cfg.incoming_size),
           draw(cfg.incoming_divergence));
  t.incoming = TransverseState::gaussian(mean, rms);

  std::array<double, kNumActuators> u{};
  for (auto& v : u) v = rng.uniform(-1.0, 1.0);
  t.initial_settings = denormalize(u);
  return t;
}

struct Sample {
  int step_index = 0;
  MagnetSettings settings;  // as applied, after clamping
  BeamParameters parameters;
  double objective = 0.0;  // mm
  double mae = 0.0;        // mm
  ClampFlags clamped{};
};

struct NoiseConfig {
  double position_sigma_m = 0.0;

  /// Twice the screen accuracy is 40 um, so a single reading carries 20 um.
  static NoiseConfig realistic() { return {20e-6}; }
};

class InvalidSettings : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Environment {
 public:
  explicit Environment(Lattice lattice = Lattice::default_section(), NoiseConfig noise = {},
                       std::uint64_t noise_seed = 0)
      : base_lattice_(std::move(lattice)), noise_(noise), rng_(noise_seed) {}

  const Sample& reset(const Trial& trial) {
    trial_ = trial;
    lattice_ = base_lattice_.with_misalignments(trial.quad_misalignments, trial.screen_misalignment);
    history_.clear();
    if (!within_ranges(trial.initial_settings))
      throw std::invalid_argument("trial initial settings lie outside the actuator ranges");
    history_.push_back(measure(trial.initial_settings, {}));
    return history_.back();
  }

  /// Clamps, applies, measures and records. Non-finite settings are
  /// rejected and leave the history untouched.
  const Sample& step(const MagnetSettings& proposed) {
    if (!trial_) throw std::logic_error("Environment::step called before reset");
    if (!proposed.all_finite()) throw InvalidSettings("proposed magnet settings are not finite");
    const auto c = clamp_to_ranges(proposed);
    history_.push_back(measure(c.settings, c.clamped));
    return history_.back();
  }

  /// Noise-free evaluation that does not touch the history.
  BeamParameters peek(const MagnetSettings& settings) const {
    if (!trial_) throw std::logic_error("Environment::peek called before reset");
    const auto state = track(lattice_, settings.actuators(), trial_->incoming);
    return read_screen(state, lattice_.screen_misalignment(), 0.0, nullptr);
  }

  const std::vector<Sample>& history() const { return history_; }
  const Trial& trial() const { return trial_.value(); }
  const Lattice& lattice() const { return lattice_; }

 private:
  Sample measure(const MagnetSettings& s, const ClampFlags& clamped) {
    const auto state = track(lattice_, s.actuators(), trial_->incoming);
    Sample out;
    out.step_index = static_cast<int>(history_.size());
    out.settings = s;
    out.parameters = read_screen(state, lattice_.screen_misalignment(), noise_.position_sigma_m, &rng_);
    out.objective = objective(out.parameters, trial_->target);
    out.mae = out.objective / 4.0;
    out.clamped = clamped;
    return out;
  }

  Lattice base_lattice_;
  Lattice lattice_;
  NoiseConfig noise_;
  Rng rng_;
  std::optional<Trial> trial_;
  std::vector<Sample> history_;
};

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const MagnetSettings& s) {
  return {{"q1", s.q1}, {"q2", s.q2}, {"cv", s.cv}, {"q3", s.q3}, {"ch", s.ch}};
}

inline MagnetSettings settings_from_json(const nlohmann::json& j) {
  return {j.at("q1").get<double>(), j.at("q2").get<double>(), j.at("cv").get<double>(),
          j.at("q3").get<double>(), j.at("ch").get<double>()};
}

inline nlohmann::json to_json(const BeamParameters& p) {
  return {{"mu_x", p.mu_x}, {"sigma_x", p.sigma_x}, {"mu_y", p.mu_y}, {"sigma_y", p.sigma_y}};
}

inline BeamParameters beam_from_json(const nlohmann::json& j) {
  return {j.at("mu_x").get<double>(), j.at("sigma_x").get<double>(), j.at("mu_y").get<double>(),
          j.at("sigma_y").get<double>()};
}

inline constexpr const char* kTrialSchema = "beamtune.trials/1";

/// Trial fixture entry. Lengths in m, angles in rad. The target stays in
/// mm (the key says so) so that it round-trips bit-exactly.
inline nlohmann::json to_json(const Trial& t) {
  using nlohmann::json;
  json quads = json::array();
  for (const auto& q : t.quad_misalignments) quads.push_back({{"dx_m", q.dx}, {"dy_m", q.dy}});
  json cov = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(t.incoming.covariance(r, c));
    cov.push_back(row);
  }
  return {
      {"trial_id", t.trial_id},
      {"seed", t.seed},
      {"target_mm", to_json(t.target)},
      {"incoming",
       {{"mean", {t.incoming.mean(0), t.incoming.mean(1), t.incoming.mean(2), t.incoming.mean(3)}},
        {"covariance", cov}}},
      {"quad_misalignments", quads},
      {"screen_misalignment", {{"dx_m", t.screen_misalignment.dx}, {"dy_m", t.screen_misalignment.dy}}},
      {"initial_settings", to_json(t.initial_settings)},
  };
}

inline Trial trial_from_json(const nlohmann::json& j) {
  Trial t;
  t.trial_id = j.at("trial_id").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.target = beam_from_json(j.at("target_mm"));
  const auto& mean = j.at("incoming").at("mean");
  for (int i = 0; i < 4; ++i) t.incoming.mean(i) = mean.at(i).get<double>();
  const auto& cov = j.at("incoming").at("covariance");
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t.incoming.covariance(r, c) = cov.at(r).at(c).get<double>();
  const auto& quads = j.at("quad_misalignments");
  if (quads.size() != 3) throw std::invalid_argument("trial needs exactly 3 quadrupole misalignments");
  for (std::size_t i = 0; i < 3; ++i)
    t.quad_misalignments[i] = {quads[i].at("dx_m").get<double>(), quads[i].at("dy_m").get<double>()};
  t.screen_misalignment = {j.at("screen_misalignment").at("dx_m").get<double>(),
                           j.at("screen_misalignment").at("dy_m").get<double>()};
  t.initial_settings = settings_from_json(j.at("initial_settings"));
  if (!(t.target.sigma_x > 0.0 && t.target.sigma_y > 0.0))
    throw std::invalid_argument("trial target sizes must be positive");
  if (!within_ranges(t.initial_settings))
    throw std::invalid_argument("trial initial settings lie outside the actuator ranges");
  return t;
}

inline nlohmann::json trials_to_json(const std::vector<Trial>& trials) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trials) arr.push_back(to_json(t));
  return {{"schema", kTrialSchema}, {"trials", arr}};
}

inline std::vector<Trial> trials_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kTrialSchema)
    throw std::invalid_argument(std::string("trial fixture schema must be ") + kTrialSchema);
  std::vector<Trial> out;
  for (const auto& t : j.at("trials")) out.push_back(trial_from_json(t));
  return out;
}

inline std::vector<Trial> load_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trial fixture: " + path);
  return trials_from_json(nlohmann::json::parse(in));
}

/// The canonical three-trial suite (seeds 1, 2, 3).
inline std::vector<Trial> canonical_trials(const TrialGeneratorConfig& cfg = {}) {
  return {make_trial(1, cfg, 1), make_trial(2, cfg, 2), make_trial(3, cfg, 3)};
}

}  // namespace beamtune
