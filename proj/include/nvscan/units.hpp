#pragma once

// Project-wide unit conventions:
//   frequency  MHz (screening and lock-in tables use kHz, converted at the boundary)
//   time       us
//   field      V/um, magnetic field G
//   length     um
// Couplings are stored as MHz per (V/um) and MHz per G so that
// coupling * field * time is a number of cycles.

#include <numbers>

namespace nvscan {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

constexpr double khz_to_mhz(double f_khz) { return f_khz * 1e-3; }
constexpr double mhz_to_khz(double f_mhz) { return f_mhz * 1e3; }

// counts/s * us -> counts
constexpr double counts_in_window(double rate_per_s, double window_us) {
  return rate_per_s * window_us * 1e-6;
}

inline constexpr const char* kEngineVersion = "nvscan 1.0.0";

}  // namespace nvscan
