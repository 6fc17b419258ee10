#include "nvscan/screening.hpp"

#include "nvscan/units.hpp"

#include <cmath>
#include <stdexcept>

namespace nvscan {

namespace {

void require_positive_frequency(double f_khz) {
  if (!(f_khz > 0.0)) {
    throw std::domain_error("screening: frequency must be positive (DC is fully screened)");
  }
}

}  // namespace

void ScreeningModel::validate() const {
  if (!(cutoff_khz > 0.0)) throw std::invalid_argument("ScreeningModel: cut-off must be positive");
  if (!(dielectric_factor > 0.0 && dielectric_factor <= 1.0)) {
    throw std::invalid_argument("ScreeningModel: dielectric factor must lie in (0, 1]");
  }
}

double ScreeningModel::time_constant_us() const { return 1e3 / (kTwoPi * cutoff_khz); }

double attenuation(double f_khz, const ScreeningModel& m) {
  require_positive_frequency(f_khz);
  m.validate();
  const double x = f_khz / m.cutoff_khz;
  return x / std::sqrt(1.0 + x * x);
}

double phase_lead_deg(double f_khz, const ScreeningModel& m) {
  require_positive_frequency(f_khz);
  m.validate();
  return rad_to_deg(std::atan(m.cutoff_khz / f_khz));
}

FrequencyResponse frequency_response(double f_khz, const ScreeningModel& m) {
  return {f_khz, attenuation(f_khz, m), phase_lead_deg(f_khz, m)};
}

ScreenedWaveform apply_screening(const Waveform& w, const ScreeningModel& m) {
  m.validate();
  ScreenedWaveform out{Waveform::dc(0.0), w, true};
  switch (w.kind()) {
    case Waveform::Kind::DC:
      break;
    case Waveform::Kind::Sinusoid: {
      if (w.frequency() == 0.0) break;
      const double f_khz = mhz_to_khz(w.frequency());
      out.at_spin = Waveform::sinusoid(w.amplitude() * attenuation(f_khz, m) * m.dielectric_factor,
                                       w.frequency(),
                                       w.phase() + deg_to_rad(phase_lead_deg(f_khz, m)));
      break;
    }
    case Waveform::Kind::Sampled: {
      // dy/dt = dx/dt - y/tau with x linear on each interval.
      const double tau = m.time_constant_us();
      const auto& t = w.times();
      const auto& x = w.values();
      std::vector<double> y(x.size());
      y[0] = x[0];
      for (std::size_t k = 1; k < x.size(); ++k) {
        const double dt = t[k] - t[k - 1];
        const double slope = (x[k] - x[k - 1]) / dt;
        const double decay = std::exp(-dt / tau);
        y[k] = y[k - 1] * decay + slope * tau * (1.0 - decay);
      }
      for (double& v : y) v *= m.dielectric_factor;
      out.at_spin = Waveform::sampled(t, std::move(y));
      break;
    }
  }
  return out;
}

}  // namespace nvscan
