#pragma once

namespace beamtune::units {

constexpr double m_to_mm(double v) { return v * 1e3; }
constexpr double mm_to_m(double v) { return v * 1e-3; }
constexpr double rad_to_mrad(double v) { return v * 1e3; }
constexpr double mrad_to_rad(double v) { return v * 1e-3; }
constexpr double mm_to_um(double v) { return v * 1e3; }

}  // namespace beamtune::units
