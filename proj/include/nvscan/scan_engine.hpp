#pragma once

// Scanning measurement: probe geometry, tip motion, and per-pixel AC and DC
// imaging pipelines built from the solved field, screening and readout.

#include "nvscan/field_solver.hpp"
#include "nvscan/pulse_engine.hpp"
#include "nvscan/screening.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace nvscan {

struct ProbeConfig {
  int pillar_count = 7;
  double pillar_spacing = 7.0;  // um
  std::vector<double> pillar_diameters = {0.8, 0.3, 0.3, 0.3, 0.3, 0.3, 0.8};  // um
  double nv_depth = 0.04;  // um
  double tilt = 0.0;       // rad
  int contact_pillar = 0;

  void validate() const;
};

/// Distance from the NV in `sensing_pillar` to the sample:
///   (L + (d_contact - d_sensing)/2) tan(tilt) + nv_depth,  L = spacing * |index difference|.
/// Throws std::invalid_argument when the sensing pillar is the contact pillar,
/// out of range, or the geometry puts the sensing pillar below the surface.
double nv_sample_distance(const ProbeConfig& probe, int sensing_pillar);

enum class MotionMode { Fundamental, Clang };

std::string to_string(MotionMode mode);
MotionMode parse_motion_mode(const std::string& text);

struct TipMotion {
  MotionMode mode = MotionMode::Clang;
  double frequency_khz = 190.0;
  double amplitude = 0.013;                 // um
  double direction = 0.5235987755982988;    // rad from x in the sample plane (30 deg)
  double beta = -0.03;

  static TipMotion clang();
  static TipMotion fundamental();
  void validate() const;
};

/// E' A + beta E, with E' the derivative along the motion direction.
double motion_upconverted_amplitude(double e_zeta, double de_along_motion, const TipMotion& motion);

/// Derivative along the motion direction of a field that varies only along x.
double along_motion(double de_dx, const TipMotion& motion);

/// First sine harmonic of E(x0 + A cos(dir) sin wt) (1 + beta sin wt) over one
/// period, by the trapezoid rule on `samples` points.
double first_harmonic(const std::function<double(double)>& e_of_x, double x0,
                      const TipMotion& motion, int samples = 256);

struct MotionCheck {
  double linear = 0.0;
  double fourier = 0.0;
  double discrepancy = 0.0;  // |fourier - linear| / (|E' A| + |beta E|)
  bool flagged = false;
};

MotionCheck check_motion(const std::function<double(double)>& e_of_x, double x0, double e_zeta,
                         double de_dx, const TipMotion& motion, double threshold = 0.1);

struct ScanPlan {
  double x_start = -2.0;
  double x_stop = 2.0;
  double x_step = 0.02;
  int y_count = 1;  // rows of the pseudo-3-D map; the cross-section is invariant along y
  double y_step = 0.02;
  std::int64_t n_avg = 1000000;
  std::uint64_t seed = 1;
  std::uint32_t repeat = 0;
  bool unwrap = true;

  void validate() const;
  std::vector<double> x_positions() const;
  std::vector<double> y_positions() const;
};

/// Field source for a scan: E_zeta at the NV height for the solved geometry
/// at `reference_volts`, and its x-gradient. Sources from make_field_source
/// evaluate a cubic B-spline through the profile; hand-built ones interpolate
/// `profile` and `gradient` linearly.
struct FieldSource {
  struct Spline;

  ZetaProfile profile;
  std::vector<double> gradient;
  double reference_volts = 1.0;
  std::shared_ptr<const Spline> spline;
  bool spline_gradient = false;

  double field(double x) const;
  double gradient_at(double x) const;
};

/// `smoothing` > 1 takes the gradient from smoothed central differences
/// instead of the spline derivative.
FieldSource make_field_source(const Grid2D& grid, double height, const ProjectionAxis& axis,
                              double reference_volts, int smoothing = 1);

struct AcScanSetup {
  SequenceSpec sequence{};  // XY4, tau = 8 us
  double drive_vpp = 0.96;       // V
  double drive_freq_khz = 250.0;
  ScreeningModel screening{};
  CoherenceModel coherence{};
  ReadoutModel readout{};
  double d_perp = 0.17;
};

struct DcScanSetup {
  SequenceSpec sequence{.tau = 0.0};  // tau <= 0 derives tau from the motion frequency
  double v_dc = 16.0;       // V
  TipMotion motion{};
  ScreeningModel screening{};
  CoherenceModel coherence{};
  ReadoutModel readout{};
  double d_perp = 0.17;
  double validity_threshold = 0.1;
};

struct ScanResult {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> phi;    // rad, row-major ny x nx
  std::vector<double> field;  // recovered E_zeta (AC) or E_amp (DC), V/um
  std::vector<double> truth;  // model value the recovery aims at, V/um
  std::vector<std::uint8_t> flags;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> metadata;

  std::size_t nx() const { return x.size(); }
  std::size_t ny() const { return y.size(); }
};

/// AC imaging: in-phase drive, screened at the drive frequency, matched DD
/// sequence, four-block readout. Throws std::invalid_argument when the drive
/// frequency is not the sequence's matched frequency.
ScanResult run_ac_scan(const ScanPlan& plan, const FieldSource& source, const AcScanSetup& setup);

/// Motion-enabled DC imaging at the mechanical frequency.
ScanResult run_dc_scan(const ScanPlan& plan, const FieldSource& source, const DcScanSetup& setup);

enum class MapQuantity { Phi, Field, Truth };

std::string to_string(MapQuantity q);

/// Writes `<stem>.bin` (float64-le, row-major ny x nx), `<stem>.txt` and, for
/// single-row scans, `<stem>.tsv`. The .txt holds `extra_sidecar` verbatim,
/// then a [result] section with dimensions and the scan metadata.
/// Returns the written paths.
std::vector<std::string> render_map(const ScanResult& result, MapQuantity quantity,
                                    const std::string& stem, const std::string& extra_sidecar = {});

}  // namespace nvscan
