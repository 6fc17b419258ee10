#include "nvscan/analysis.hpp"

#include "nvscan/rng.hpp"
#include "nvscan/units.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nvscan {

namespace {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

MeanVar mean_var(const std::vector<double>& v) {
  MeanVar m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

}  // namespace

SineFit fit_sinusoid(const std::vector<double>& theta, const std::vector<double>& y) {
  const std::size_t n = theta.size();
  if (n != y.size()) throw std::invalid_argument("sine fit: size mismatch");
  if (n < 4) throw std::invalid_argument("sine fit: need at least 4 samples");

  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector3d row(std::cos(theta[k]), std::sin(theta[k]), 1.0);
    normal += row * row.transpose();
    rhs += row * y[k];
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  if (eig.eigenvalues()(0) <= 1e-10 * eig.eigenvalues()(2)) {
    throw std::invalid_argument("sine fit: rank-deficient design (samples at equivalent phases)");
  }
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
  const Eigen::Vector3d c = ldlt.solve(rhs);
  const double a = c(0);
  const double b = c(1);

  SineFit fit;
  fit.amplitude = std::hypot(a, b);
  fit.phase = std::atan2(-b, a);
  if (fit.phase == -kPi) fit.phase = kPi;
  fit.offset = c(2);

  double rss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = y[k] - (a * std::cos(theta[k]) + b * std::sin(theta[k]) + c(2));
    rss += r * r;
  }
  fit.residual_rms = std::sqrt(rss / static_cast<double>(n));
  const double sigma2 = n > 3 ? rss / static_cast<double>(n - 3) : 0.0;
  const Eigen::Matrix3d cov = sigma2 * ldlt.solve(Eigen::Matrix3d::Identity());
  fit.offset_se = std::sqrt(std::max(0.0, cov(2, 2)));
  if (fit.amplitude > 0.0) {
    const double amp2 = fit.amplitude * fit.amplitude;
    const Eigen::Vector2d g_amp(a / fit.amplitude, b / fit.amplitude);
    const Eigen::Vector2d g_phase(b / amp2, -a / amp2);
    const Eigen::Matrix2d cab = cov.topLeftCorner<2, 2>();
    fit.amplitude_se = std::sqrt(std::max(0.0, g_amp.dot(cab * g_amp)));
    fit.phase_se = std::sqrt(std::max(0.0, g_phase.dot(cab * g_phase)));
  } else {
    fit.amplitude_se = std::sqrt(std::max(0.0, 0.5 * (cov(0, 0) + cov(1, 1))));
    fit.phase_se = kPi;
  }
  return fit;
}

SineFit sine_fit(const std::vector<double>& t_us, const std::vector<double>& y, double f_khz) {
  std::vector<double> theta(t_us.size());
  const double omega = kTwoPi * khz_to_mhz(f_khz);
  for (std::size_t k = 0; k < t_us.size(); ++k) theta[k] = omega * t_us[k];
  return fit_sinusoid(theta, y);
}

void SensitivityParams::validate() const {
  if (!(count_rate > 0.0) || !(readout_window > 0.0) || !(init_time > 0.0) || !(tau > 0.0) ||
      !(d_perp > 0.0)) {
    throw std::invalid_argument("SensitivityParams: rates, times and d_perp must be positive");
  }
  if (!(contrast > 0.0 && contrast < 1.0)) {
    throw std::invalid_argument("SensitivityParams: contrast must lie in (0, 1)");
  }
}

double snr(const SensitivityParams& p, double delta_e, double t_total_s) {
  p.validate();
  // F [1/s] * T_r [us] / (t_ini + tau) [us] is counts per second of integration.
  return kPi * p.d_perp * p.tau * delta_e * p.contrast *
         std::sqrt(p.count_rate * p.readout_window * t_total_s / (p.init_time + p.tau));
}

double sensitivity_ac(const SensitivityParams& p) {
  p.validate();
  return std::sqrt((p.init_time + p.tau) / (p.count_rate * p.readout_window)) /
         (kPi * p.d_perp * p.tau * p.contrast);
}

double sensitivity_gradient(double eta_e, double amplitude_um) {
  if (!(amplitude_um > 0.0)) {
    throw std::domain_error("sensitivity_gradient: motion amplitude must be positive");
  }
  return eta_e / amplitude_um;
}

MonteCarloResult monte_carlo_sensitivity(const SensitivityParams& p, const ReadoutModel& readout,
                                         int trials, const MonteCarloOptions& options) {
  if (trials < 100) throw std::invalid_argument("monte_carlo_sensitivity: trials must be >= 100");
  p.validate();
  const double delta_e = options.delta_e > 0.0 ? options.delta_e
                         : readout.shot_noise ? sensitivity_ac(p)
                                              : 1e-3 * sensitivity_ac(p);
  const double shots = 1e6 / (p.init_time + p.tau);  // repetitions in 1 s
  const double window = counts_in_window(1.0, p.readout_window) * shots;

  const auto mean_counts = [&](double e) {
    const double phi = kTwoPi * p.d_perp * e * p.tau;
    const double prob = 0.5 * (1.0 - std::sin(phi));
    return p.count_rate * (1.0 - p.contrast * (1.0 - prob)) * window;
  };

  MonteCarloResult out;
  if (!readout.shot_noise) {
    out.slope = (mean_counts(delta_e) - mean_counts(-delta_e)) / (2.0 * delta_e);
    out.noise = std::sqrt(p.count_rate * window);
    out.estimate = out.noise / std::abs(out.slope);
    return out;
  }

  std::vector<double> plus(trials), minus(trials);
  const double m_plus = mean_counts(delta_e);
  const double m_minus = mean_counts(-delta_e);
  for (int t = 0; t < trials; ++t) {
    RandomStream s_plus(readout.seed, static_cast<std::uint64_t>(t), 0);
    RandomStream s_minus(readout.seed, static_cast<std::uint64_t>(t), 1);
    plus[t] = static_cast<double>(poisson(s_plus, m_plus));
    minus[t] = static_cast<double>(poisson(s_minus, m_minus));
  }

  const auto estimate = [&](const std::vector<int>& idx, double& slope, double& noise) {
    std::vector<double> a, b;
    a.reserve(idx.size());
    b.reserve(idx.size());
    for (int k : idx) {
      a.push_back(plus[k]);
      b.push_back(minus[k]);
    }
    const MeanVar ma = mean_var(a);
    const MeanVar mb = mean_var(b);
    slope = (ma.mean - mb.mean) / (2.0 * delta_e);
    noise = std::sqrt(0.5 * (ma.var + mb.var));
    return noise / std::abs(slope);
  };

  std::vector<int> all(trials);
  std::iota(all.begin(), all.end(), 0);
  out.estimate = estimate(all, out.slope, out.noise);

  std::vector<double> boot;
  RandomStream pick(readout.seed ^ 0x5bd1e995u, 0, 0xFFFFFFFFu);
  for (int b = 0; b < options.bootstrap; ++b) {
    std::vector<int> idx(trials);
    for (int& k : idx) k = static_cast<int>(pick.uniform() * trials);
    double slope = 0.0, noise = 0.0;
    boot.push_back(estimate(idx, slope, noise));
  }
  out.error = boot.size() > 1 ? std::sqrt(mean_var(boot).var) : 0.0;
  return out;
}

BartlettResult bartlett_test(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw std::invalid_argument("bartlett_test: need at least two groups");
  double total = 0.0, pooled = 0.0, log_sum = 0.0, inv_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw std::invalid_argument("bartlett_test: groups need >= 2 values");
    const double dof = static_cast<double>(g.size() - 1);
    const double var = mean_var(g).var;
    if (!(var > 0.0)) throw std::invalid_argument("bartlett_test: zero variance group");
    total += dof;
    pooled += dof * var;
    log_sum += dof * std::log(var);
    inv_sum += 1.0 / dof;
  }
  pooled /= total;
  BartlettResult r;
  r.dof = k - 1;
  r.statistic = (total * std::log(pooled) - log_sum) /
                (1.0 + (inv_sum - 1.0 / total) / (3.0 * (k - 1)));
  r.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(r.dof), std::max(0.0, r.statistic)));
  return r;
}

BartlettResult combine_chi_squared(const std::vector<BartlettResult>& parts) {
  BartlettResult r;
  for (const BartlettResult& p : parts) {
    r.statistic += p.statistic;
    r.dof += p.dof;
  }
  if (r.dof == 0) return r;
  r.p_value = boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(r.dof), std::max(0.0, r.statistic)));
  return r;
}

}  // namespace nvscan
