#pragma once

// Known-frequency sine fits, closed-form sensitivity and its Monte Carlo check.

#include "nvscan/pulse_engine.hpp"

#include <cstdint>
#include <vector>

namespace nvscan {

struct SineFit {
  double amplitude = 0.0;
  double phase = 0.0;  // y = amplitude cos(theta + phase) + offset, phase in (-pi, pi]
  double offset = 0.0;
  double amplitude_se = 0.0;
  double phase_se = 0.0;
  double offset_se = 0.0;
  double residual_rms = 0.0;
};

/// Least squares on {cos theta, sin theta, 1} by 3x3 normal equations.
/// Throws std::invalid_argument with fewer than 4 samples or a rank-deficient design.
SineFit fit_sinusoid(const std::vector<double>& theta, const std::vector<double>& y);

/// theta = 2 pi f t with t in us and f in kHz.
SineFit sine_fit(const std::vector<double>& t_us, const std::vector<double>& y, double f_khz);

struct SensitivityParams {
  double count_rate = 1e5;      // F, counts/s
  double contrast = 0.2;        // C
  double readout_window = 0.2;  // T_r, us
  double init_time = 2.0;       // t_ini, us
  double tau = 8.0;             // us
  double d_perp = 0.17;         // MHz um/V

  void validate() const;
};

/// pi d tau dE C sqrt(F T_r T / (t_ini + tau)).
double snr(const SensitivityParams& p, double delta_e, double t_total_s = 1.0);

/// sqrt((t_ini + tau)/(F T_r)) / (pi d tau C), V/um/sqrt(Hz).
double sensitivity_ac(const SensitivityParams& p);

/// eta_E / A (A in um). Throws std::domain_error for A <= 0.
double sensitivity_gradient(double eta_e, double amplitude_um);

struct MonteCarloOptions {
  double delta_e = 0.0;  // probe field, V/um; 0 = closed-form eta (1e-3 eta without noise)
  int bootstrap = 200;
};

struct MonteCarloResult {
  double estimate = 0.0;  // V/um/sqrt(Hz)
  double error = 0.0;     // bootstrap standard error
  double slope = 0.0;     // counts per V/um in 1 s
  double noise = 0.0;     // counts, standard deviation in 1 s
};

/// Simulates `trials` repeats of 1 s of single-quadrature measurements at
/// +-delta_e and reports the field that gives unit SNR. Rates and times come
/// from `p`; `readout` supplies shot_noise and seed. Without shot noise the
/// noise is the bright-state shot noise sqrt(F T_r N). Throws for trials < 100.
MonteCarloResult monte_carlo_sensitivity(const SensitivityParams& p, const ReadoutModel& readout,
                                         int trials, const MonteCarloOptions& options = {});

struct BartlettResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Bartlett's test for equal variances across groups.
BartlettResult bartlett_test(const std::vector<std::vector<double>>& groups);

/// Sum of independent Bartlett statistics and degrees of freedom.
BartlettResult combine_chi_squared(const std::vector<BartlettResult>& parts);

}  // namespace nvscan
