#include "nvscan/scan_engine.hpp"

#include "nvscan/format.hpp"
#include "nvscan/rng.hpp"
#include "nvscan/units.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nvscan {

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double xq) {
  if (xs.empty() || xq < xs.front() || xq > xs.back()) {
    throw std::out_of_range("scan position outside the field profile");
  }
  auto it = std::upper_bound(xs.begin(), xs.end(), xq);
  if (it == xs.end()) return ys.back();
  const std::size_t k = static_cast<std::size_t>(it - xs.begin());
  const double u = (xq - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + u * (ys[k] - ys[k - 1]);
}

std::vector<double> axis_positions(double start, double stop, double step) {
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) out[k] = start + k * step;
  return out;
}

void unwrap_rows(ScanResult& r) {
  const std::size_t nx = r.nx();
  for (std::size_t j = 0; j < r.ny(); ++j) {
    for (std::size_t i = 1; i < nx; ++i) {
      double& cur = r.phi[j * nx + i];
      const double prev = r.phi[j * nx + i - 1];
      cur -= kTwoPi * std::round((cur - prev) / kTwoPi);
    }
  }
}

// Phase-to-field factor of a matched DD sequence for an in-phase drive:
// phi = 2 pi d (2/pi) T kappa att cos(lead) E.
double matched_gain(const PulseSequence& seq, double d_perp, const ScreeningModel& m,
                    double f_khz) {
  const double lead = deg_to_rad(phase_lead_deg(f_khz, m));
  return kTwoPi * d_perp * (2.0 / kPi) * seq.window() * m.dielectric_factor *
         attenuation(f_khz, m) * std::cos(lead);
}

void require_matched(const PulseSequence& seq, double f_khz) {
  const double matched = matched_frequency(seq);
  if (matched <= 0.0 || std::abs(khz_to_mhz(f_khz) - matched) > 1e-9 * matched) {
    throw std::invalid_argument("signal frequency " + format_double(f_khz) +
                                " kHz is not matched to the sequence (" +
                                format_double(mhz_to_khz(matched)) + " kHz)");
  }
}

double measure_pixel(double phi_true, double envelope, const ReadoutModel& rm,
                     std::int64_t n_avg, std::uint64_t pixel, std::uint32_t repeat) {
  RandomStream stream(rm.seed, pixel, repeat);
  return extract_phase(measure_four_block(phi_true, envelope, rm, n_avg, &stream)).phi;
}

void common_metadata(ScanResult& r, const ScanPlan& plan, const FieldSource& source,
                     const ScreeningModel& m, const PulseSequence& seq, const ReadoutModel& rm) {
  auto add = [&](const std::string& k, const std::string& v) { r.metadata.emplace_back(k, v); };
  add("engine", kEngineVersion);
  add("height_um", format_double(source.profile.height));
  add("grid_spacing_um", format_double(source.profile.spacing));
  add("solver_residual", format_double(source.profile.residual));
  add("reference_volts", format_double(source.reference_volts));
  add("cutoff_khz", format_double(m.cutoff_khz));
  add("dielectric_factor", format_double(m.dielectric_factor));
  add("sequence", to_text(seq.spec));
  add("seed", std::to_string(rm.seed));
  add("repeat", std::to_string(plan.repeat));
  add("n_avg", std::to_string(plan.n_avg));
  add("shot_noise", rm.shot_noise ? "true" : "false");
  add("unwrap", plan.unwrap ? "true" : "false");
}

ScanResult empty_result(const ScanPlan& plan) {
  ScanResult r;
  r.x = plan.x_positions();
  r.y = plan.y_positions();
  const std::size_t n = r.x.size() * r.y.size();
  r.phi.assign(n, 0.0);
  r.field.assign(n, 0.0);
  r.truth.assign(n, 0.0);
  r.flags.assign(n, 0);
  return r;
}

}  // namespace

void ProbeConfig::validate() const {
  if (pillar_count < 2) throw std::invalid_argument("probe: need at least two pillars");
  if (static_cast<int>(pillar_diameters.size()) != pillar_count) {
    throw std::invalid_argument("probe: one diameter per pillar required");
  }
  if (!(pillar_spacing > 0.0) || nv_depth < 0.0 || tilt < 0.0 || tilt >= kPi / 2) {
    throw std::invalid_argument("probe: spacing must be positive, depth and tilt non-negative");
  }
  if (contact_pillar < 0 || contact_pillar >= pillar_count) {
    throw std::invalid_argument("probe: contact pillar out of range");
  }
}

double nv_sample_distance(const ProbeConfig& probe, int sensing_pillar) {
  probe.validate();
  if (sensing_pillar < 0 || sensing_pillar >= probe.pillar_count) {
    throw std::invalid_argument("nv_sample_distance: sensing pillar out of range");
  }
  if (sensing_pillar == probe.contact_pillar) {
    throw std::invalid_argument("nv_sample_distance: sensing pillar is the contact pillar");
  }
  const double lever = probe.pillar_spacing * std::abs(sensing_pillar - probe.contact_pillar);
  const double arm = lever + 0.5 * (probe.pillar_diameters[probe.contact_pillar] -
                                    probe.pillar_diameters[sensing_pillar]);
  const double standoff = arm * std::tan(probe.tilt);
  if (arm < 0.0 || standoff < 0.0) {
    throw std::invalid_argument("nv_sample_distance: geometry implies interpenetration");
  }
  return standoff + probe.nv_depth;
}

std::string to_string(MotionMode mode) {
  return mode == MotionMode::Clang ? "clang" : "fundamental";
}

MotionMode parse_motion_mode(const std::string& text) {
  std::string k = text;
  std::transform(k.begin(), k.end(), k.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (k == "clang") return MotionMode::Clang;
  if (k == "fundamental") return MotionMode::Fundamental;
  throw std::invalid_argument("unknown motion mode '" + text + "'");
}

TipMotion TipMotion::clang() { return TipMotion{}; }

TipMotion TipMotion::fundamental() {
  TipMotion m;
  m.mode = MotionMode::Fundamental;
  m.frequency_khz = 32.0;
  m.amplitude = 0.0008;
  return m;
}

void TipMotion::validate() const {
  if (amplitude < 0.0) throw std::invalid_argument("motion: amplitude must be >= 0");
  if (!(frequency_khz > 0.0)) throw std::invalid_argument("motion: frequency must be positive");
}

double motion_upconverted_amplitude(double e_zeta, double de_along_motion, const TipMotion& motion) {
  return de_along_motion * motion.amplitude + motion.beta * e_zeta;
}

double along_motion(double de_dx, const TipMotion& motion) {
  return std::cos(motion.direction) * de_dx;
}

double first_harmonic(const std::function<double(double)>& e_of_x, double x0,
                      const TipMotion& motion, int samples) {
  if (samples < 8) throw std::invalid_argument("first_harmonic: need at least 8 samples");
  const double reach = motion.amplitude * std::cos(motion.direction);
  double sum = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double s = std::sin(kTwoPi * k / samples);
    sum += e_of_x(x0 + reach * s) * (1.0 + motion.beta * s) * s;
  }
  return 2.0 * sum / samples;
}

MotionCheck check_motion(const std::function<double(double)>& e_of_x, double x0, double e_zeta,
                         double de_dx, const TipMotion& motion, double threshold) {
  MotionCheck c;
  const double grad_term = along_motion(de_dx, motion) * motion.amplitude;
  c.linear = grad_term + motion.beta * e_zeta;
  c.fourier = first_harmonic(e_of_x, x0, motion);
  const double scale = std::abs(grad_term) + std::abs(motion.beta * e_zeta);
  c.discrepancy = scale > 0.0 ? std::abs(c.fourier - c.linear) / scale : 0.0;
  c.flagged = c.discrepancy > threshold;
  return c;
}

void ScanPlan::validate() const {
  if (!(x_step > 0.0) || !(x_stop >= x_start)) {
    throw std::invalid_argument("scan plan: step must be positive and stop >= start");
  }
  if (y_count < 1 || (y_count > 1 && !(y_step > 0.0))) {
    throw std::invalid_argument("scan plan: y_count >= 1 and positive y_step required");
  }
  if (n_avg < 1) throw std::invalid_argument("scan plan: n_avg must be >= 1");
}

std::vector<double> ScanPlan::x_positions() const {
  validate();
  return axis_positions(x_start, x_stop, x_step);
}

std::vector<double> ScanPlan::y_positions() const {
  validate();
  std::vector<double> out(static_cast<std::size_t>(y_count));
  for (int k = 0; k < y_count; ++k) out[k] = k * y_step;
  return out;
}

struct FieldSource::Spline {
  boost::math::interpolators::cardinal_cubic_b_spline<double> e;
};

double FieldSource::field(double x) const {
  if (!spline) return profile.at(x);
  if (profile.x.empty() || x < profile.x.front() || x > profile.x.back()) {
    throw std::out_of_range("scan position outside the field profile");
  }
  return spline->e(x);
}

double FieldSource::gradient_at(double x) const {
  if (!spline_gradient) return interpolate(profile.x, gradient, x);
  if (profile.x.empty() || x < profile.x.front() || x > profile.x.back()) {
    throw std::out_of_range("scan position outside the field profile");
  }
  return spline->e.prime(x);
}

FieldSource make_field_source(const Grid2D& grid, double height, const ProjectionAxis& axis,
                              double reference_volts, int smoothing) {
  if (reference_volts == 0.0) {
    throw std::invalid_argument("field source: reference potential must be non-zero");
  }
  FieldSource s;
  s.profile = project_zeta(field_at_height(grid, height), axis);
  s.reference_volts = reference_volts;
  const auto& xs = s.profile.x;
  if (xs.size() < 5) {
    s.gradient = gradient_x(xs, s.profile.e_zeta, smoothing);
    return s;
  }
  // The tip excursion is below the grid spacing, so a piecewise-linear profile
  // would hand the motion model cell secants instead of the local slope.
  s.spline = std::make_shared<const FieldSource::Spline>(FieldSource::Spline{
      {s.profile.e_zeta.begin(), s.profile.e_zeta.end(), xs.front(), xs[1] - xs[0]}});
  if (smoothing > 1) {
    s.gradient = gradient_x(xs, s.profile.e_zeta, smoothing);
  } else {
    s.spline_gradient = true;
    s.gradient.resize(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) s.gradient[k] = s.spline->e.prime(xs[k]);
  }
  return s;
}

ScanResult run_ac_scan(const ScanPlan& plan, const FieldSource& source, const AcScanSetup& setup) {
  setup.screening.validate();
  setup.readout.validate();
  const PulseSequence seq = build_sequence(setup.sequence);
  require_matched(seq, setup.drive_freq_khz);

  ScanResult r = empty_result(plan);
  const double scale = 0.5 * setup.drive_vpp / source.reference_volts;
  const double envelope = apply_coherence(seq, setup.coherence);
  const double gain = matched_gain(seq, setup.d_perp, setup.screening, setup.drive_freq_khz);
  const double f_mhz = khz_to_mhz(setup.drive_freq_khz);
  const std::size_t nx = r.nx();
  const auto total = static_cast<long>(r.phi.size());

  for (double x : r.x) (void)source.field(x);  // range check before the parallel loop

#pragma omp parallel for schedule(static)
  for (long p = 0; p < total; ++p) {
    const double e = scale * source.field(r.x[static_cast<std::size_t>(p) % nx]);
    const Waveform drive = Waveform::sinusoid(e, f_mhz, 0.0);
    const Waveform at_spin = apply_screening(drive, setup.screening).at_spin;
    const double phi = accumulated_phase_exact(seq, at_spin, setup.d_perp);
    r.truth[p] = e;
    r.phi[p] = measure_pixel(phi, envelope, setup.readout, plan.n_avg,
                             static_cast<std::uint64_t>(p), plan.repeat);
  }
  if (plan.unwrap) unwrap_rows(r);
  for (std::size_t p = 0; p < r.phi.size(); ++p) r.field[p] = r.phi[p] / gain;

  common_metadata(r, plan, source, setup.screening, seq, setup.readout);
  r.metadata.emplace_back("mode", "ac");
  r.metadata.emplace_back("drive_vpp", format_double(setup.drive_vpp));
  r.metadata.emplace_back("drive_freq_khz", format_double(setup.drive_freq_khz));
  r.metadata.emplace_back("coherence_envelope", format_double(envelope));
  r.metadata.emplace_back("phase_to_field_gain", format_double(gain));
  return r;
}

ScanResult run_dc_scan(const ScanPlan& plan, const FieldSource& source, const DcScanSetup& setup) {
  setup.screening.validate();
  setup.readout.validate();
  setup.motion.validate();

  SequenceSpec spec = setup.sequence;
  const double f_khz = setup.motion.frequency_khz;
  if (!(spec.tau > 0.0)) {
    const int n = pi_pulse_count(spec.kind, spec.repeats);
    if (n == 0) throw std::invalid_argument("dc scan: sequence needs pi pulses");
    spec.tau = n / (2.0 * khz_to_mhz(f_khz)) - n * spec.pi_duration;
  }
  const PulseSequence seq = build_sequence(spec);
  require_matched(seq, f_khz);

  ScanResult r = empty_result(plan);
  if (setup.motion.amplitude == 0.0 && setup.motion.beta == 0.0) {
    r.warnings.push_back("motion amplitude and beta are both zero: null experiment");
  }
  const double scale = setup.v_dc / source.reference_volts;
  const double envelope = apply_coherence(seq, setup.coherence);
  const double gain = matched_gain(seq, setup.d_perp, setup.screening, f_khz);
  const double f_mhz = khz_to_mhz(f_khz);
  const std::size_t nx = r.nx();
  const auto total = static_cast<long>(r.phi.size());
  const auto e_of_x = [&](double x) { return scale * source.field(x); };

  const double reach = setup.motion.amplitude * std::abs(std::cos(setup.motion.direction));
  for (double x : r.x) {
    (void)source.field(x - reach);
    (void)source.field(x + reach);
  }

#pragma omp parallel for schedule(static)
  for (long p = 0; p < total; ++p) {
    const double x = r.x[static_cast<std::size_t>(p) % nx];
    const double e = e_of_x(x);
    const double de_dx = scale * source.gradient_at(x);
    const MotionCheck check =
        check_motion(e_of_x, x, e, de_dx, setup.motion, setup.validity_threshold);
    const Waveform signal = Waveform::sinusoid(check.linear, f_mhz, 0.0);
    const Waveform at_spin = apply_screening(signal, setup.screening).at_spin;
    const double phi = accumulated_phase_exact(seq, at_spin, setup.d_perp);
    r.truth[p] = check.linear;
    r.flags[p] = check.flagged ? 1 : 0;
    r.phi[p] = measure_pixel(phi, envelope, setup.readout, plan.n_avg,
                             static_cast<std::uint64_t>(p), plan.repeat);
  }
  if (plan.unwrap) unwrap_rows(r);
  for (std::size_t p = 0; p < r.phi.size(); ++p) r.field[p] = r.phi[p] / gain;

  common_metadata(r, plan, source, setup.screening, seq, setup.readout);
  const auto flagged = std::count(r.flags.begin(), r.flags.end(), std::uint8_t{1});
  r.metadata.emplace_back("mode", "dc");
  r.metadata.emplace_back("v_dc", format_double(setup.v_dc));
  r.metadata.emplace_back("motion_mode", to_string(setup.motion.mode));
  r.metadata.emplace_back("motion_freq_khz", format_double(f_khz));
  r.metadata.emplace_back("amplitude_um", format_double(setup.motion.amplitude));
  r.metadata.emplace_back("direction_rad", format_double(setup.motion.direction));
  r.metadata.emplace_back("beta", format_double(setup.motion.beta));
  r.metadata.emplace_back("coherence_envelope", format_double(envelope));
  r.metadata.emplace_back("phase_to_field_gain", format_double(gain));
  r.metadata.emplace_back("flagged_pixels", std::to_string(flagged));
  return r;
}

std::string to_string(MapQuantity q) {
  switch (q) {
    case MapQuantity::Phi: return "phi_rad";
    case MapQuantity::Field: return "field_V_per_um";
    case MapQuantity::Truth: return "model_field_V_per_um";
  }
  return "unknown";
}

std::vector<std::string> render_map(const ScanResult& result, MapQuantity quantity,
                                    const std::string& stem, const std::string& extra_sidecar) {
  const std::vector<double>& data = quantity == MapQuantity::Phi     ? result.phi
                                    : quantity == MapQuantity::Field ? result.field
                                                                     : result.truth;
  std::vector<std::string> written;
  {
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + stem + ".bin");
    write_f64_le(bin, data);
    written.push_back(stem + ".bin");
  }
  {
    std::ofstream txt(stem + ".txt");
    if (!txt) throw std::runtime_error("cannot write " + stem + ".txt");
    // Leading text (typically the resolved config) first, then the map description.
    txt << extra_sidecar << "[result]\n"
        << "format=float64-le row-major, rows along y, x fastest\n"
        << "quantity=" << to_string(quantity) << "\n"
        << "nx=" << result.nx() << "\nny=" << result.ny() << "\n"
        << "x0_um=" << format_double(result.x.front()) << "\n"
        << "dx_um=" << format_double(result.nx() > 1 ? result.x[1] - result.x[0] : 0.0) << "\n"
        << "y0_um=" << format_double(result.y.front()) << "\n"
        << "dy_um=" << format_double(result.ny() > 1 ? result.y[1] - result.y[0] : 0.0) << "\n";
    for (const auto& [k, v] : result.metadata) txt << k << '=' << v << '\n';
    for (std::size_t k = 0; k < result.warnings.size(); ++k) {
      txt << "warning" << k << '=' << result.warnings[k] << '\n';
    }
    written.push_back(stem + ".txt");
  }
  if (result.ny() == 1) {
    std::ofstream tsv(stem + ".tsv");
    if (!tsv) throw std::runtime_error("cannot write " + stem + ".tsv");
    tsv << "x_um\tphi_rad\tfield_V_per_um\tmodel_field_V_per_um\tflag\n";
    for (std::size_t i = 0; i < result.nx(); ++i) {
      tsv << format_double(result.x[i]) << '\t' << format_double(result.phi[i]) << '\t'
          << format_double(result.field[i]) << '\t' << format_double(result.truth[i]) << '\t'
          << static_cast<int>(result.flags[i]) << '\n';
    }
    written.push_back(stem + ".tsv");
  }
  return written;
}

}  // namespace nvscan
