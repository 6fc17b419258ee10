#include "nvscan/pulse_engine.hpp"

#include "nvscan/format.hpp"
#include "nvscan/units.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nvscan {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<double> pi_phases(SequenceKind kind, int repeats) {
  constexpr double x = 0.0;
  constexpr double y = kPi / 2;
  std::vector<double> unit;
  switch (kind) {
    case SequenceKind::Ramsey: return {};
    case SequenceKind::SpinEcho: return {x};
    case SequenceKind::CPMG: unit = {y}; break;
    case SequenceKind::XY4: unit = {x, y, x, y}; break;
    case SequenceKind::XY8: unit = {x, y, x, y, y, x, y, x}; break;
  }
  std::vector<double> out;
  for (int r = 0; r < repeats; ++r) out.insert(out.end(), unit.begin(), unit.end());
  return out;
}

// Sample breakpoints of a sampled waveform strictly inside (a, b), shifted by -t0.
std::vector<double> breakpoints(const Waveform& w, double a, double b, double t0) {
  std::vector<double> cuts{a};
  if (w.kind() == Waveform::Kind::Sampled) {
    for (double t : w.times()) {
      const double local = t - t0;
      if (local > a && local < b) cuts.push_back(local);
    }
  }
  cuts.push_back(b);
  return cuts;
}

void require_defined(const PulseSequence& seq, const Waveform& w, double t0) {
  if (!w.defined_on(t0, t0 + seq.window())) {
    throw std::out_of_range("waveform undefined over the sequence span");
  }
}

// Closed-form integral of w over [a, b] (absolute times).
double integral_exact(const Waveform& w, double a, double b) {
  switch (w.kind()) {
    case Waveform::Kind::DC: return w.level() * (b - a);
    case Waveform::Kind::Sinusoid: {
      const double omega = kTwoPi * w.frequency();
      if (omega == 0.0) return w.amplitude() * std::cos(w.phase()) * (b - a);
      return w.amplitude() / omega *
             (std::sin(omega * b + w.phase()) - std::sin(omega * a + w.phase()));
    }
    case Waveform::Kind::Sampled: {
      const auto& t = w.times();
      double sum = 0.0;
      double lo = a;
      auto it = std::upper_bound(t.begin(), t.end(), a);
      while (lo < b) {
        const double hi = (it == t.end()) ? b : std::min(b, *it);
        sum += 0.5 * (w(lo) + w(hi)) * (hi - lo);
        lo = hi;
        if (it != t.end()) ++it;
      }
      return sum;
    }
  }
  return 0.0;
}

}  // namespace

std::string to_string(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::Ramsey: return "ramsey";
    case SequenceKind::SpinEcho: return "spin-echo";
    case SequenceKind::CPMG: return "cpmg";
    case SequenceKind::XY4: return "xy4";
    case SequenceKind::XY8: return "xy8";
  }
  return "unknown";
}

SequenceKind parse_sequence_kind(const std::string& text) {
  const std::string k = lower(text);
  if (k == "ramsey") return SequenceKind::Ramsey;
  if (k == "spin-echo" || k == "spinecho" || k == "echo") return SequenceKind::SpinEcho;
  if (k == "cpmg") return SequenceKind::CPMG;
  if (k == "xy4" || k == "xy-4") return SequenceKind::XY4;
  if (k == "xy8" || k == "xy-8") return SequenceKind::XY8;
  throw std::invalid_argument("unsupported sequence kind '" + text + "'");
}

int pi_pulse_count(SequenceKind kind, int repeats) {
  return static_cast<int>(pi_phases(kind, repeats).size());
}

int PulseSequence::pi_count() const { return pi_pulse_count(spec.kind, spec.repeats); }

double PulseSequence::window() const { return spec.tau + pi_count() * spec.pi_duration; }

std::vector<double> PulseSequence::toggle_times() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < modulation.size(); ++k) out.push_back(modulation[k].start);
  return out;
}

int PulseSequence::sign_at(double t) const {
  for (const ModulationSegment& seg : modulation) {
    if (t >= seg.start && t <= seg.stop) return seg.sign;
  }
  return 0;
}

PulseSequence build_sequence(const SequenceSpec& spec) {
  if (!(spec.tau > 0.0) || !std::isfinite(spec.tau)) {
    throw std::invalid_argument("build_sequence: tau must be positive");
  }
  if (spec.repeats < 1) throw std::invalid_argument("build_sequence: repeats must be >= 1");
  if (spec.pi_duration < 0.0 || spec.init_duration < 0.0 || !(spec.readout_window > 0.0)) {
    throw std::invalid_argument("build_sequence: durations must be non-negative");
  }

  PulseSequence seq;
  seq.spec = spec;
  const std::vector<double> phases = pi_phases(spec.kind, spec.repeats);
  const int n = static_cast<int>(phases.size());
  const double window = seq.window();
  const double half_pi = 0.5 * spec.pi_duration;  // pi/2 pulses last half a pi pulse

  std::vector<double> centres;
  for (int k = 1; k <= n; ++k) centres.push_back((k - 0.5) * window / n);

  seq.elements.emplace_back(LaserInit{spec.init_duration});
  seq.elements.emplace_back(MWPulse{0.0, kPi / 2, half_pi});
  double cursor = 0.5 * half_pi;
  for (int k = 0; k < n; ++k) {
    const double pulse_start = centres[k] - half_pi;
    seq.elements.emplace_back(FreeEvolve{pulse_start - cursor});
    seq.elements.emplace_back(MWPulse{phases[k], kPi, spec.pi_duration});
    cursor = centres[k] + half_pi;
  }
  seq.elements.emplace_back(FreeEvolve{window - cursor});
  seq.elements.emplace_back(MWPulse{spec.final_phase, kPi / 2, half_pi});
  seq.elements.emplace_back(Readout{spec.readout_window});

  double start = 0.0;
  int sign = 1;
  for (double c : centres) {
    seq.modulation.push_back({start, c, sign});
    start = c;
    sign = -sign;
  }
  seq.modulation.push_back({start, window, sign});
  return seq;
}

PulseSequence build_sequence(SequenceKind kind, double tau, int repeats, double final_phase) {
  SequenceSpec spec;
  spec.kind = kind;
  spec.tau = tau;
  spec.repeats = repeats;
  spec.final_phase = final_phase;
  return build_sequence(spec);
}

double matched_frequency(const PulseSequence& seq) {
  const int n = seq.pi_count();
  return n == 0 ? 0.0 : n / (2.0 * seq.window());
}

std::string to_text(const SequenceSpec& spec) {
  std::ostringstream out;
  out << "kind=" << to_string(spec.kind) << " repeats=" << spec.repeats
      << " tau=" << format_double(spec.tau) << " final_phase=" << format_double(spec.final_phase)
      << " pi_duration=" << format_double(spec.pi_duration)
      << " init=" << format_double(spec.init_duration)
      << " readout=" << format_double(spec.readout_window);
  return out.str();
}

SequenceSpec parse_sequence_spec(const std::string& text) {
  SequenceSpec spec;
  for (const std::string& token : split_ws(text)) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("sequence token without '=': " + token);
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "kind") spec.kind = parse_sequence_kind(value);
    else if (key == "repeats") spec.repeats = static_cast<int>(parse_double(value));
    else if (key == "tau") spec.tau = parse_double(value);
    else if (key == "final_phase") spec.final_phase = parse_double(value);
    else if (key == "pi_duration") spec.pi_duration = parse_double(value);
    else if (key == "init") spec.init_duration = parse_double(value);
    else if (key == "readout") spec.readout_window = parse_double(value);
    else throw std::invalid_argument("unknown sequence key '" + key + "'");
  }
  return spec;
}

Waveform Waveform::dc(double level) {
  Waveform w;
  w.kind_ = Kind::DC;
  w.level_ = level;
  return w;
}

Waveform Waveform::sinusoid(double amplitude, double frequency_mhz, double phase) {
  if (frequency_mhz < 0.0) throw std::invalid_argument("Waveform: negative frequency");
  Waveform w;
  w.kind_ = Kind::Sinusoid;
  w.amplitude_ = amplitude;
  w.frequency_ = frequency_mhz;
  w.phase_ = phase;
  return w;
}

Waveform Waveform::sampled(std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size() || times.size() < 2) {
    throw std::invalid_argument("Waveform: need at least two (t, value) samples");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("Waveform: sample times must be strictly increasing");
    }
  }
  Waveform w;
  w.kind_ = Kind::Sampled;
  w.times_ = std::move(times);
  w.values_ = std::move(values);
  return w;
}

bool Waveform::defined_on(double a, double b) const {
  if (kind_ != Kind::Sampled) return true;
  return a >= times_.front() && b <= times_.back();
}

double Waveform::operator()(double t) const {
  switch (kind_) {
    case Kind::DC: return level_;
    case Kind::Sinusoid: return amplitude_ * std::cos(kTwoPi * frequency_ * t + phase_);
    case Kind::Sampled: {
      if (t < times_.front() || t > times_.back()) {
        throw std::out_of_range("Waveform: time outside sampled span");
      }
      auto it = std::upper_bound(times_.begin(), times_.end(), t);
      if (it == times_.end()) return values_.back();
      const std::size_t k = static_cast<std::size_t>(it - times_.begin());
      const double u = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
      return values_[k - 1] + u * (values_[k] - values_[k - 1]);
    }
  }
  return 0.0;
}

Waveform Waveform::scaled(double factor) const {
  Waveform w = *this;
  w.level_ *= factor;
  w.amplitude_ *= factor;
  for (double& v : w.values_) v *= factor;
  return w;
}

double accumulated_phase(const PulseSequence& seq, const Waveform& w, double d_perp, double t0) {
  require_defined(seq, w, t0);
  using boost::math::quadrature::gauss_kronrod;
  const auto f = [&](double t) { return w(t0 + t); };
  double total = 0.0;
  for (const ModulationSegment& seg : seq.modulation) {
    const std::vector<double> cuts = breakpoints(w, seg.start, seg.stop, t0);
    double piece_sum = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
      piece_sum += gauss_kronrod<double, 21>::integrate(f, cuts[k - 1], cuts[k], 15, 1e-13);
    }
    total += seg.sign * piece_sum;
  }
  return kTwoPi * d_perp * total;
}

double accumulated_phase_exact(const PulseSequence& seq, const Waveform& w, double d_perp,
                               double t0) {
  require_defined(seq, w, t0);
  double total = 0.0;
  for (const ModulationSegment& seg : seq.modulation) {
    total += seg.sign * integral_exact(w, t0 + seg.start, t0 + seg.stop);
  }
  return kTwoPi * d_perp * total;
}

std::vector<RamseySample> ramsey_train(double offset, double spacing, int count, double tau,
                                       const Waveform& w, double d_perp, RamseyMode mode,
                                       double overhead) {
  if (count < 1) throw std::invalid_argument("ramsey_train: count must be >= 1");
  if (spacing < tau + overhead) {
    throw std::invalid_argument("ramsey_train: spacing shorter than tau + overhead");
  }
  const PulseSequence seq = build_sequence(SequenceKind::Ramsey, tau);
  std::vector<RamseySample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double start = offset + k * spacing;
    RamseySample s;
    s.time = start + 0.5 * tau;
    s.phi = mode == RamseyMode::ExactWindow ? accumulated_phase_exact(seq, w, d_perp, start)
                                            : kTwoPi * d_perp * w(s.time) * tau;
    out.push_back(s);
  }
  return out;
}

void CoherenceModel::validate() const {
  if (!(t2_star > 0.0) || !(t2_base > 0.0) || !(stretch > 0.0) || !(pulse_scaling > 0.0)) {
    throw std::invalid_argument("CoherenceModel: parameters must be positive");
  }
}

double apply_coherence(const PulseSequence& seq, const CoherenceModel& model) {
  model.validate();
  const double tau = seq.spec.tau;
  const int n = seq.pi_count();
  if (n == 0) {
    const double x = tau / model.t2_star;
    return std::exp(-x * x);
  }
  const double t2 = model.t2_base * std::pow(static_cast<double>(n), model.pulse_scaling);
  return std::exp(-std::pow(tau / t2, model.stretch));
}

void ReadoutModel::validate() const {
  if (!(contrast > 0.0 && contrast < 1.0)) {
    throw std::invalid_argument("ReadoutModel: contrast must lie in (0, 1)");
  }
  if (!(count_rate > 0.0) || !(readout_window > 0.0) || !(init_time > 0.0)) {
    throw std::invalid_argument("ReadoutModel: rates and times must be positive");
  }
}

ReadoutSample simulate_readout(double phi, double final_phase, double envelope,
                               const ReadoutModel& rm, std::int64_t n_avg,
                               RandomStream* stream) {
  if (n_avg <= 0) throw std::invalid_argument("simulate_readout: n_avg must be positive");
  rm.validate();
  const double p = 0.5 * (1.0 + envelope * std::cos(phi + final_phase));
  ReadoutSample s;
  s.rate = rm.count_rate * (1.0 - rm.contrast * (1.0 - p));
  const double shots_window = counts_in_window(1.0, rm.readout_window) * static_cast<double>(n_avg);
  s.mean_counts = s.rate * shots_window;
  if (rm.shot_noise) {
    if (stream == nullptr) throw std::invalid_argument("simulate_readout: shot noise needs a stream");
    s.counts = poisson(*stream, s.mean_counts);
    s.measured_rate = static_cast<double>(s.counts) / shots_window;
  } else {
    s.counts = std::llround(s.mean_counts);
    s.measured_rate = s.rate;
  }
  return s;
}

std::array<double, 4> measure_four_block(double phi, double envelope, const ReadoutModel& rm,
                                         std::int64_t n_avg, RandomStream* stream) {
  std::array<double, 4> rates{};
  for (std::size_t k = 0; k < 4; ++k) {
    rates[k] = simulate_readout(phi, kFourBlockPhases[k], envelope, rm, n_avg, stream).measured_rate;
  }
  return rates;
}

PhaseEstimate extract_phase(double f1, double f2, double f3, double f4) {
  if (!(f1 + f2 > 0.0) || !(f3 + f4 > 0.0)) {
    throw std::domain_error("extract_phase: dead readout (zero fluorescence in a block pair)");
  }
  PhaseEstimate e;
  e.cos_raw = 2.0 * (f2 - f1) / (f2 + f1);
  e.sin_raw = 2.0 * (f4 - f3) / (f4 + f3);
  e.visibility = std::hypot(e.cos_raw, e.sin_raw);
  e.phi = std::atan2(e.sin_raw, e.cos_raw);
  if (e.phi == -kPi) e.phi = kPi;
  return e;
}

PhaseEstimate extract_phase(const std::array<double, 4>& rates) {
  return extract_phase(rates[0], rates[1], rates[2], rates[3]);
}

void write_trace(std::ostream& out, const PulseSequence& seq, const Waveform& w, int samples,
                 double t0) {
  if (samples < 2) throw std::invalid_argument("write_trace: need at least two samples");
  require_defined(seq, w, t0);
  out << "# t_us\ts\tE_zeta\n";
  const double window = seq.window();
  for (int k = 0; k < samples; ++k) {
    const double t = window * k / (samples - 1);
    out << format_double(t) << '\t' << seq.sign_at(t) << '\t' << format_double(w(t0 + t)) << '\n';
  }
}

}  // namespace nvscan
