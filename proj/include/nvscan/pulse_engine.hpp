#pragma once

// Pulse sequences, phase accumulation against E_zeta(t) waveforms, coherence
// envelopes and fluorescence readout.
//
// Time origin: t = 0 is the centre of the first pi/2 pulse. The free
// evolution window is [0, T] where T = tau + n_pi * pi_duration; pi pulses sit
// at (k - 1/2) T / n_pi. The modulation s(t) starts at +1 and toggles at every
// pi-pulse centre.

#include "nvscan/rng.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace nvscan {

struct LaserInit {
  double duration = 0.0;  // us
};
struct MWPulse {
  double axis_phase = 0.0;  // rad, 0 = x, pi/2 = y
  double angle = 0.0;       // nominal rotation, rad
  double duration = 0.0;    // us
};
struct FreeEvolve {
  double duration = 0.0;  // us
};
struct Readout {
  double window = 0.0;  // us
};

using SequenceElement = std::variant<LaserInit, MWPulse, FreeEvolve, Readout>;

enum class SequenceKind { Ramsey, SpinEcho, CPMG, XY4, XY8 };

std::string to_string(SequenceKind kind);
/// Accepts ramsey, spin-echo, cpmg, xy4, xy8 (case-insensitive).
SequenceKind parse_sequence_kind(const std::string& text);

struct SequenceSpec {
  SequenceKind kind = SequenceKind::XY4;
  int repeats = 1;              // N for CPMG, r for XY4/XY8
  double tau = 8.0;             // total free evolution, us
  double final_phase = 1.5707963267948966;  // axis phase of the last pi/2
  double pi_duration = 0.0;     // 0 = ideal pulses
  double init_duration = 2.0;   // us
  double readout_window = 0.2;  // us
};

struct ModulationSegment {
  double start = 0.0;
  double stop = 0.0;
  int sign = 1;
};

struct PulseSequence {
  SequenceSpec spec;
  std::vector<SequenceElement> elements;
  std::vector<ModulationSegment> modulation;

  int pi_count() const;
  /// Span of the modulation function, tau + n_pi * pi_duration.
  double window() const;
  std::vector<double> toggle_times() const;
  /// s(t) on [0, window]; 0 outside.
  int sign_at(double t) const;
};

/// Throws std::invalid_argument for tau <= 0 or repeats < 1.
PulseSequence build_sequence(const SequenceSpec& spec);
PulseSequence build_sequence(SequenceKind kind, double tau, int repeats = 1,
                             double final_phase = 1.5707963267948966);

/// Number of pi pulses for a kind and repeat count.
int pi_pulse_count(SequenceKind kind, int repeats);

/// Signal frequency (MHz) for which a DD sequence acts as a matched filter.
double matched_frequency(const PulseSequence& seq);

/// One-line "key=value" serialization and its inverse.
std::string to_text(const SequenceSpec& spec);
SequenceSpec parse_sequence_spec(const std::string& text);

class Waveform {
 public:
  enum class Kind { DC, Sinusoid, Sampled };

  static Waveform dc(double level);
  /// amplitude * cos(2 pi f t + phase), f in MHz.
  static Waveform sinusoid(double amplitude, double frequency_mhz, double phase = 0.0);
  /// Linear interpolation between samples; times strictly increasing.
  static Waveform sampled(std::vector<double> times, std::vector<double> values);

  Kind kind() const { return kind_; }
  double level() const { return level_; }
  double amplitude() const { return amplitude_; }
  double frequency() const { return frequency_; }
  double phase() const { return phase_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  bool defined_on(double a, double b) const;
  /// Throws std::out_of_range outside the sampled span.
  double operator()(double t) const;
  Waveform scaled(double factor) const;

 private:
  Kind kind_ = Kind::DC;
  double level_ = 0.0;
  double amplitude_ = 0.0;
  double frequency_ = 0.0;
  double phase_ = 0.0;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// 2 pi d_perp * integral of s(t) E(t0 + t) over the sequence window, by
/// adaptive Gauss-Kronrod quadrature on every constant-sign piece.
double accumulated_phase(const PulseSequence& seq, const Waveform& w, double d_perp,
                         double t0 = 0.0);

/// Same quantity from closed-form integrals of each piece.
double accumulated_phase_exact(const PulseSequence& seq, const Waveform& w, double d_perp,
                               double t0 = 0.0);

enum class RamseyMode { ExactWindow, Midpoint };

struct RamseySample {
  double time = 0.0;  // window centre, us
  double phi = 0.0;   // rad
};

/// Ramsey windows of length tau starting at offset + k * spacing.
/// Throws if spacing < tau + overhead or count < 1.
std::vector<RamseySample> ramsey_train(double offset, double spacing, int count, double tau,
                                       const Waveform& w, double d_perp,
                                       RamseyMode mode = RamseyMode::ExactWindow,
                                       double overhead = 0.0);

struct CoherenceModel {
  double t2_star = 1.5;            // us
  double t2_base = 10.0;           // us
  double stretch = 1.5;            // p
  double pulse_scaling = 2.0 / 3;  // s

  void validate() const;
};

/// Ramsey: exp(-(tau/T2*)^2); N pulses: exp(-(tau/T2(N))^p), T2(N) = T2_base N^s.
double apply_coherence(const PulseSequence& seq, const CoherenceModel& model);

struct ReadoutModel {
  double count_rate = 1e5;      // F0, counts/s
  double contrast = 0.2;        // C
  double readout_window = 0.2;  // T_r, us
  double init_time = 2.0;       // t_ini, us
  bool shot_noise = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ReadoutSample {
  double rate = 0.0;         // mean fluorescence F, counts/s
  double mean_counts = 0.0;  // F T_r n_avg
  std::int64_t counts = 0;
  double measured_rate = 0.0;  // counts / (T_r n_avg), or F when noiseless
};

/// Population P = (1 + env cos(phi + chi)) / 2, F = F0 (1 - C (1 - P)).
/// chi = pi/2 gives P = (1 - sin phi)/2. `stream` is required with shot noise.
ReadoutSample simulate_readout(double phi, double final_phase, double envelope,
                               const ReadoutModel& rm, std::int64_t n_avg,
                               RandomStream* stream = nullptr);

/// Final-pulse phases of the four-block: F1 -x, F2 +x, F3 +y, F4 -y in the
/// convention P = (1 + env cos(phi + chi))/2.
inline constexpr std::array<double, 4> kFourBlockPhases = {3.141592653589793, 0.0,
                                                           1.5707963267948966,
                                                           4.71238898038469};

std::array<double, 4> measure_four_block(double phi, double envelope, const ReadoutModel& rm,
                                         std::int64_t n_avg, RandomStream* stream = nullptr);

struct PhaseEstimate {
  double phi = 0.0;         // (-pi, pi]
  double cos_raw = 0.0;     // 2 (F2 - F1) / (F2 + F1)
  double sin_raw = 0.0;     // 2 (F4 - F3) / (F4 + F3)
  double visibility = 0.0;  // hypot(cos_raw, sin_raw)

  double cos_phi() const { return cos_raw / visibility; }
  double sin_phi() const { return sin_raw / visibility; }
};

/// Throws std::domain_error when F1 + F2 or F3 + F4 is not positive.
PhaseEstimate extract_phase(double f1, double f2, double f3, double f4);
PhaseEstimate extract_phase(const std::array<double, 4>& rates);

/// Writes "t s E" rows at `samples` evenly spaced points over the window.
void write_trace(std::ostream& out, const PulseSequence& seq, const Waveform& w, int samples,
                 double t0 = 0.0);

}  // namespace nvscan
