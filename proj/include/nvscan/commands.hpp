#pragma once

// Config-driven virtual experiments behind the command-line tool.

#include "nvscan/analysis.hpp"
#include "nvscan/config.hpp"
#include "nvscan/field_solver.hpp"
#include "nvscan/scan_engine.hpp"
#include "nvscan/screening.hpp"
#include "nvscan/spin_model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace nvscan {

// Typed views of a config. Invalid values raise ConfigError naming the section.
NVSpecies species_from(const Config& c);
FieldEnvironment environment_from(const Config& c);
NuclearSpin nuclear_from(const Config& c);
Eigen::Vector3d mw_direction_from(const Config& c);
ScreeningModel screening_from(const Config& c);
ElectrodeGeometry2D geometry_from(const Config& c);
SolverOptions solver_options_from(const Config& c);
ProjectionAxis projection_from(const Config& c);
ProbeConfig probe_from(const Config& c);
/// NV height above the top metal surface: probe.height, or the probe geometry.
double probe_height_from(const Config& c);
TipMotion motion_from(const Config& c);
/// sequence.tau = auto resolves to the tau matched to `signal_khz`.
SequenceSpec sequence_from(const Config& c, double signal_khz);
CoherenceModel coherence_from(const Config& c);
ReadoutModel readout_from(const Config& c);
ScanPlan plan_from(const Config& c);
SensitivityParams sensitivity_from(const Config& c);

std::vector<OdmrPoint> odmr(const Config& c);

struct RamseyRun {
  double frequency_khz = 0.0;
  std::vector<double> time;      // window centres, us
  std::vector<double> phi_true;  // noiseless accumulated phase
  std::vector<double> phi;       // measured through the four-block readout
  SineFit fit;
};

/// Ramsey train against a screened sinusoid at `f_khz`; `stream_tag` separates noise streams.
RamseyRun ramsey_run(const Config& c, double f_khz, std::uint32_t stream_tag = 0);

struct LockinRow {
  double frequency_khz = 0.0;
  std::string method;  // "ramsey" or "xy4"
  double amplitude_ratio = 0.0;
  double amplitude_ratio_se = 0.0;
  double phase_lead_deg = 0.0;
  double phase_lead_se_deg = 0.0;
  double model_amplitude_ratio = 0.0;
  double model_phase_lead_deg = 0.0;
};

/// Ramsey trains below sweep.split_khz, phase-stepped XY4 lock-in above;
/// each point is fitted and normalized by the unscreened expectation.
std::vector<LockinRow> lockin_sweep(const Config& c);

FieldSource field_source_from(const Config& c, Grid2D* grid_out = nullptr);
ScanResult ac_scan(const Config& c);
ScanResult dc_scan(const Config& c);

struct SensitivityRow {
  std::string label;
  double eta_e = 0.0;          // V/um/sqrt(Hz)
  double eta_gradient = 0.0;   // V/um^2/sqrt(Hz)
  double snr_at_0_1 = 0.0;     // SNR for 0.1 V/um in 1 s
  double monte_carlo = 0.0;    // V/um/sqrt(Hz)
  double monte_carlo_error = 0.0;
};

std::vector<SensitivityRow> sensitivity_table(const Config& c);

inline constexpr const char* kCommands[] = {"odmr",    "ramsey",      "lockin-sweep", "ac-scan",
                                            "dc-scan", "sensitivity", "solve-field"};

/// Runs one subcommand, writing its files under `out_dir`. Returns the paths written.
std::vector<std::string> run_command(const std::string& command, const Config& c,
                                     const std::string& out_dir, std::ostream& log);

}  // namespace nvscan
