#pragma once

// Surface-charge screening as a first-order high-pass filter plus a static
// dielectric factor for the field inside the tip. Frequencies in kHz.

#include "nvscan/pulse_engine.hpp"

namespace nvscan {

struct ScreeningModel {
  double cutoff_khz = 35.4;
  double dielectric_factor = 0.41;  // kappa_d

  void validate() const;
  /// 1/f_c in us, the "RC" figure quoted alongside the cut-off. Metadata only.
  double rc_metadata_us() const { return 1e3 / cutoff_khz; }
  /// Filter time constant 1/(2 pi f_c) in us.
  double time_constant_us() const;
};

struct FrequencyResponse {
  double frequency_khz = 0.0;
  double amplitude_ratio = 0.0;
  double phase_lead_deg = 0.0;
};

/// (f/f_c) / sqrt(1 + (f/f_c)^2). Throws for f <= 0.
double attenuation(double f_khz, const ScreeningModel& m);
/// atan(f_c / f) in degrees. Throws for f <= 0.
double phase_lead_deg(double f_khz, const ScreeningModel& m);
FrequencyResponse frequency_response(double f_khz, const ScreeningModel& m);

struct ScreenedWaveform {
  Waveform at_spin;     // field reaching the NV, kappa_d included
  Waveform unscreened;  // input, kept for metadata
  bool dielectric_applied = true;
};

/// DC is fully screened (0 at the spin). Sinusoids pick up attenuation * kappa_d
/// and the phase lead. Sampled waveforms pass through the exact recursive form
/// of the filter for piecewise-linear input, starting from y(t0) = x(t0).
ScreenedWaveform apply_screening(const Waveform& w, const ScreeningModel& m);

}  // namespace nvscan
