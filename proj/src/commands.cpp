#include "nvscan/commands.hpp"

#include "nvscan/format.hpp"
#include "nvscan/rng.hpp"
#include "nvscan/units.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

namespace nvscan {

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

template <class F>
auto checked(const std::string& section, F&& build) {
  try {
    return build();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
}

double auto_or(const Config& c, const std::string& s, const std::string& k, double fallback) {
  return c.is_auto(s, k) ? fallback : c.number(s, k);
}

std::string sidecar_text(const Config& c, const std::string& command, const KeyValues& result) {
  std::ostringstream out;
  out << c.resolved_text() << "\n[result]\n"
      << "engine=" << kEngineVersion << "\n"
      << "command=" << command << "\n";
  for (const auto& [k, v] : result) out << k << '=' << v << '\n';
  return out.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace

NVSpecies species_from(const Config& c) {
  return checked("species", [&] {
    const std::string iso = c.get("species", "isotope");
    NVSpecies sp;
    if (iso == "15" || iso == "N15" || iso == "n15") sp = NVSpecies::nv15();
    else if (iso == "14" || iso == "N14" || iso == "n14") sp = NVSpecies::nv14();
    else throw ConfigError("config key 'species.isotope' must be 14 or 15");
    sp.zero_field_splitting = c.number("species", "d_gs");
    sp.gamma_e = c.number("species", "gamma_e");
    sp.gamma_n = auto_or(c, "species", "gamma_n", sp.gamma_n);
    sp.a_par = auto_or(c, "species", "a_par", sp.a_par);
    sp.a_perp = auto_or(c, "species", "a_perp", sp.a_perp);
    sp.quadrupole = auto_or(c, "species", "quadrupole", sp.quadrupole);
    sp.d_perp = c.number("species", "d_perp");
    sp.d_par = c.number("species", "d_par");
    return sp;
  });
}

FieldEnvironment environment_from(const Config& c) {
  FieldEnvironment env;
  env.b = Eigen::Vector3d(c.number("environment", "b_x"), c.number("environment", "b_y"),
                          c.number("environment", "b_z"));
  env.e = Eigen::Vector3d(c.number("environment", "e_x"), c.number("environment", "e_y"),
                          c.number("environment", "e_z"));
  return env;
}

NuclearSpin nuclear_from(const Config& c) {
  const std::string v = c.get("environment", "nuclear");
  if (v == "include") return NuclearSpin::Include;
  if (v == "ignore") return NuclearSpin::Ignore;
  throw ConfigError("config key 'environment.nuclear' must be include or ignore");
}

Eigen::Vector3d mw_direction_from(const Config& c) {
  const double az = deg_to_rad(c.number("odmr", "mw_azimuth_deg"));
  const double polar = deg_to_rad(c.number("odmr", "mw_polar_deg"));
  return {std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar)};
}

ScreeningModel screening_from(const Config& c) {
  return checked("screening", [&] {
    ScreeningModel m;
    m.cutoff_khz = c.number("screening", "cutoff_khz");
    m.dielectric_factor = c.number("screening", "dielectric_factor");
    m.validate();
    return m;
  });
}

ElectrodeGeometry2D geometry_from(const Config& c) {
  return checked("geometry", [&] {
    ElectrodeGeometry2D g;
    if (c.is_auto("geometry", "conductors")) {
      g = ElectrodeGeometry2D::default_device(
          c.number("geometry", "bias"), c.number("geometry", "centre_width"),
          c.number("geometry", "side_width"), c.number("geometry", "gap"),
          c.number("geometry", "thickness"));
    } else {
      // "x_min x_max z_min z_max volts; ..."
      std::string text = c.get("geometry", "conductors");
      std::istringstream rects(text);
      for (std::string rect; std::getline(rects, rect, ';');) {
        const std::vector<std::string> parts = split_ws(rect);
        if (parts.empty()) continue;
        if (parts.size() != 5) {
          throw ConfigError("config key 'geometry.conductors' needs 5 numbers per rectangle");
        }
        Conductor k;
        try {
          k = {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2]),
               parse_double(parts[3]), parse_double(parts[4])};
        } catch (const std::invalid_argument&) {
          throw ConfigError("config key 'geometry.conductors' has a non-numeric entry");
        }
        g.conductors.push_back(k);
      }
    }
    g.substrate_permittivity = c.number("geometry", "substrate_permittivity");
    g.domain = {c.number("geometry", "x_min"), c.number("geometry", "x_max"),
                c.number("geometry", "z_min"), c.number("geometry", "z_max")};
    g.validate();
    return g;
  });
}

SolverOptions solver_options_from(const Config& c) {
  return checked("geometry", [&] {
    SolverOptions o;
    o.spacing = c.number("geometry", "spacing");
    o.tol = c.number("geometry", "tol");
    o.method = parse_solver_method(c.get("geometry", "method"));
    o.max_iterations = static_cast<int>(c.integer("geometry", "max_iterations"));
    if (!(o.spacing > 0.0)) throw ConfigError("config key 'geometry.spacing' must be positive");
    if (!(o.tol >= 1e-10)) throw ConfigError("config key 'geometry.tol' must be >= 1e-10");
    return o;
  });
}

ProjectionAxis projection_from(const Config& c) {
  return {deg_to_rad(c.number("projection", "phi_deg")),
          deg_to_rad(c.number("projection", "theta_deg"))};
}

ProbeConfig probe_from(const Config& c) {
  return checked("probe", [&] {
    ProbeConfig p;
    p.pillar_count = static_cast<int>(c.integer("probe", "pillar_count"));
    p.pillar_spacing = c.number("probe", "pillar_spacing");
    p.pillar_diameters = c.numbers("probe", "diameters");
    p.nv_depth = c.number("probe", "nv_depth");
    p.tilt = deg_to_rad(c.number("probe", "tilt_deg"));
    p.contact_pillar = static_cast<int>(c.integer("probe", "contact_pillar"));
    p.validate();
    return p;
  });
}

double probe_height_from(const Config& c) {
  if (!c.is_auto("probe", "height")) return c.number("probe", "height");
  return checked("probe", [&] {
    return nv_sample_distance(probe_from(c), static_cast<int>(c.integer("probe", "sensing_pillar")));
  });
}

TipMotion motion_from(const Config& c) {
  return checked("motion", [&] {
    TipMotion m = parse_motion_mode(c.get("motion", "mode")) == MotionMode::Clang
                      ? TipMotion::clang()
                      : TipMotion::fundamental();
    m.frequency_khz = auto_or(c, "motion", "frequency_khz", m.frequency_khz);
    m.amplitude = auto_or(c, "motion", "amplitude", m.amplitude);
    m.direction = deg_to_rad(c.number("motion", "direction_deg"));
    m.beta = c.number("motion", "beta");
    m.validate();
    return m;
  });
}

SequenceSpec sequence_from(const Config& c, double signal_khz) {
  return checked("sequence", [&] {
    SequenceSpec s;
    s.kind = parse_sequence_kind(c.get("sequence", "kind"));
    s.repeats = static_cast<int>(c.integer("sequence", "repeats"));
    s.final_phase = c.number("sequence", "final_phase");
    s.pi_duration = c.number("sequence", "pi_duration");
    s.init_duration = c.number("sequence", "init");
    s.readout_window = c.number("sequence", "readout");
    if (c.is_auto("sequence", "tau")) {
      const int n = pi_pulse_count(s.kind, s.repeats);
      if (n == 0 || !(signal_khz > 0.0)) {
        throw std::invalid_argument("tau=auto needs a DD sequence and a signal frequency");
      }
      s.tau = n / (2.0 * khz_to_mhz(signal_khz)) - n * s.pi_duration;
    } else {
      s.tau = c.number("sequence", "tau");
    }
    (void)build_sequence(s);
    return s;
  });
}

CoherenceModel coherence_from(const Config& c) {
  return checked("coherence", [&] {
    CoherenceModel m;
    m.t2_star = c.number("coherence", "t2_star");
    m.t2_base = c.number("coherence", "t2_base");
    m.stretch = c.number("coherence", "stretch");
    m.pulse_scaling = c.number("coherence", "pulse_scaling");
    m.validate();
    return m;
  });
}

ReadoutModel readout_from(const Config& c) {
  return checked("readout", [&] {
    ReadoutModel r;
    r.count_rate = c.number("readout", "count_rate");
    r.contrast = c.number("readout", "contrast");
    r.readout_window = c.number("readout", "window");
    r.init_time = c.number("readout", "init");
    r.shot_noise = c.flag("readout", "shot_noise");
    r.seed = c.unsigned_integer("run", "seed");
    r.validate();
    return r;
  });
}

ScanPlan plan_from(const Config& c) {
  return checked("scan", [&] {
    ScanPlan p;
    p.x_start = c.number("scan", "x_start");
    p.x_stop = c.number("scan", "x_stop");
    p.x_step = c.number("scan", "x_step");
    p.y_count = static_cast<int>(c.integer("scan", "y_count"));
    p.y_step = c.number("scan", "y_step");
    p.n_avg = c.integer("scan", "n_avg");
    p.unwrap = c.flag("scan", "unwrap");
    p.seed = c.unsigned_integer("run", "seed");
    p.validate();
    return p;
  });
}

SensitivityParams sensitivity_from(const Config& c) {
  return checked("sensitivity", [&] {
    SensitivityParams p;
    p.count_rate = c.number("readout", "count_rate");
    p.contrast = c.number("readout", "contrast");
    p.readout_window = c.number("readout", "window");
    p.init_time = c.number("readout", "init");
    p.tau = c.number("sensitivity", "tau");
    p.d_perp = c.number("species", "d_perp");
    p.validate();
    return p;
  });
}

std::vector<OdmrPoint> odmr(const Config& c) {
  FrequencyGrid grid;
  if (!c.is_auto("odmr", "f_start") || !c.is_auto("odmr", "f_stop") ||
      !c.is_auto("odmr", "f_step")) {
    grid = {c.number("odmr", "f_start"), c.number("odmr", "f_stop"), c.number("odmr", "f_step")};
    if (!(grid.step > 0.0)) throw ConfigError("config key 'odmr.f_step' must be positive");
  }
  const double width = c.number("odmr", "line_width");
  if (!(width > 0.0)) throw ConfigError("config key 'odmr.line_width' must be positive");
  return checked("odmr", [&] {
    return odmr_spectrum(species_from(c), environment_from(c), mw_direction_from(c), width, grid,
                         nuclear_from(c));
  });
}

RamseyRun ramsey_run(const Config& c, double f_khz, std::uint32_t stream_tag) {
  const double d_perp = species_from(c).d_perp;
  const ScreeningModel screening = screening_from(c);
  const ReadoutModel readout = readout_from(c);
  const CoherenceModel coherence = coherence_from(c);
  const double offset = c.number("sweep", "ramsey_offset");
  const double spacing = c.number("sweep", "ramsey_spacing");
  const double tau = c.number("sweep", "ramsey_tau");
  const auto count = static_cast<int>(c.integer("sweep", "ramsey_count"));
  const double amplitude = c.number("sweep", "ramsey_amplitude");
  const auto n_avg = c.integer("sweep", "n_avg");

  const Waveform drive = Waveform::sinusoid(amplitude, khz_to_mhz(f_khz), 0.0);
  const Waveform at_spin = apply_screening(drive, screening).at_spin;
  const std::vector<RamseySample> samples =
      checked("sweep", [&] { return ramsey_train(offset, spacing, count, tau, at_spin, d_perp); });
  const double envelope = apply_coherence(build_sequence(SequenceKind::Ramsey, tau), coherence);

  RamseyRun run;
  run.frequency_khz = f_khz;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    RandomStream stream(readout.seed, k, stream_tag);
    const auto rates = measure_four_block(samples[k].phi, envelope, readout, n_avg, &stream);
    run.time.push_back(samples[k].time);
    run.phi_true.push_back(samples[k].phi);
    run.phi.push_back(extract_phase(rates).phi);
  }
  run.fit = sine_fit(run.time, run.phi, f_khz);
  return run;
}

std::vector<LockinRow> lockin_sweep(const Config& c) {
  const double d_perp = species_from(c).d_perp;
  const ScreeningModel screening = screening_from(c);
  const ReadoutModel readout = readout_from(c);
  const CoherenceModel coherence = coherence_from(c);
  const double split = c.number("sweep", "split_khz");
  const double ramsey_tau = c.number("sweep", "ramsey_tau");
  const double ramsey_amp = c.number("sweep", "ramsey_amplitude");
  const double dd_tau = c.number("sweep", "dd_tau");
  const double dd_amp = c.number("sweep", "dd_amplitude");
  const auto points = static_cast<int>(c.integer("sweep", "phase_points"));
  const auto n_avg = c.integer("sweep", "n_avg");
  if (points < 4) throw ConfigError("config key 'sweep.phase_points' must be >= 4");

  std::vector<LockinRow> rows;
  std::uint32_t tag = 0;
  for (double f : c.numbers("sweep", "frequencies_khz")) {
    if (!(f > 0.0)) throw ConfigError("config key 'sweep.frequencies_khz' must be positive");
    LockinRow row;
    row.frequency_khz = f;
    row.model_amplitude_ratio = attenuation(f, screening);
    row.model_phase_lead_deg = phase_lead_deg(f, screening);
    double norm = 0.0;
    SineFit fit;
    if (f < split) {
      row.method = "ramsey";
      fit = ramsey_run(c, f, tag).fit;
      const double x = kPi * khz_to_mhz(f) * ramsey_tau;
      norm = kTwoPi * d_perp * ramsey_amp * screening.dielectric_factor * ramsey_tau * sinc(x);
    } else {
      row.method = "xy4";
      const double f_mhz = khz_to_mhz(f);
      const int r = std::max(1, static_cast<int>(std::lround(2.0 * f_mhz * dd_tau / 4.0)));
      SequenceSpec spec;
      spec.kind = SequenceKind::XY4;
      spec.repeats = r;
      spec.tau = 4.0 * r / (2.0 * f_mhz);
      const PulseSequence seq = build_sequence(spec);
      const double envelope = apply_coherence(seq, coherence);
      std::vector<double> offsets, phis;
      for (int k = 0; k < points; ++k) {
        const double phase0 = kTwoPi * k / points;
        const Waveform drive = Waveform::sinusoid(dd_amp, f_mhz, phase0);
        const double phi =
            accumulated_phase_exact(seq, apply_screening(drive, screening).at_spin, d_perp);
        RandomStream stream(readout.seed, static_cast<std::uint64_t>(k), tag);
        offsets.push_back(phase0);
        phis.push_back(
            extract_phase(measure_four_block(phi, envelope, readout, n_avg, &stream)).phi);
      }
      fit = fit_sinusoid(offsets, phis);
      norm = kTwoPi * d_perp * dd_amp * screening.dielectric_factor * (2.0 / kPi) * seq.window();
    }
    row.amplitude_ratio = fit.amplitude / norm;
    row.amplitude_ratio_se = fit.amplitude_se / norm;
    row.phase_lead_deg = rad_to_deg(fit.phase);
    row.phase_lead_se_deg = rad_to_deg(fit.phase_se);
    rows.push_back(row);
    ++tag;
  }
  return rows;
}

FieldSource field_source_from(const Config& c, Grid2D* grid_out) {
  const ElectrodeGeometry2D geom = geometry_from(c);
  double reference = 0.0;
  for (const Conductor& k : geom.conductors) reference = std::max(reference, std::abs(k.potential));
  if (reference == 0.0) throw ConfigError("[geometry] no biased conductor to scale the drive");
  const Grid2D grid = solve_laplace(geom, solver_options_from(c));
  const double height = probe_height_from(c);
  FieldSource source = checked("probe", [&] {
    return make_field_source(grid, height, projection_from(c), reference,
                             static_cast<int>(c.integer("probe", "gradient_smoothing")));
  });
  if (grid_out != nullptr) *grid_out = grid;
  return source;
}

ScanResult ac_scan(const Config& c) {
  AcScanSetup setup;
  setup.drive_vpp = c.number("scan", "drive_vpp");
  setup.drive_freq_khz = c.number("scan", "drive_freq_khz");
  setup.sequence = sequence_from(c, setup.drive_freq_khz);
  setup.screening = screening_from(c);
  setup.coherence = coherence_from(c);
  setup.readout = readout_from(c);
  setup.d_perp = species_from(c).d_perp;
  const ScanPlan plan = plan_from(c);
  const FieldSource source = field_source_from(c);
  return checked("scan", [&] { return run_ac_scan(plan, source, setup); });
}

ScanResult dc_scan(const Config& c) {
  DcScanSetup setup;
  setup.motion = motion_from(c);
  setup.v_dc = c.number("scan", "v_dc");
  setup.sequence = sequence_from(c, setup.motion.frequency_khz);
  setup.screening = screening_from(c);
  setup.coherence = coherence_from(c);
  setup.readout = readout_from(c);
  setup.d_perp = species_from(c).d_perp;
  setup.validity_threshold = c.number("motion", "validity_threshold");
  const ScanPlan plan = plan_from(c);
  const FieldSource source = field_source_from(c);
  return checked("scan", [&] { return run_dc_scan(plan, source, setup); });
}

std::vector<SensitivityRow> sensitivity_table(const Config& c) {
  const SensitivityParams base = sensitivity_from(c);
  const double amplitude = c.number("sensitivity", "amplitude");
  const auto trials = static_cast<int>(c.integer("sensitivity", "trials"));
  ReadoutModel readout = readout_from(c);
  readout.shot_noise = true;

  std::vector<SensitivityRow> rows;
  const auto add = [&](const std::string& label, const SensitivityParams& p) {
    SensitivityRow row;
    row.label = label;
    row.eta_e = sensitivity_ac(p);
    row.eta_gradient = checked("sensitivity", [&] { return sensitivity_gradient(row.eta_e, amplitude); });
    row.snr_at_0_1 = snr(p, 0.1);
    const MonteCarloResult mc =
        checked("sensitivity", [&] { return monte_carlo_sensitivity(p, readout, trials); });
    row.monte_carlo = mc.estimate;
    row.monte_carlo_error = mc.error;
    rows.push_back(row);
  };
  add("configured", base);
  SensitivityParams half = base;
  half.count_rate *= 0.5;
  add("half_count_rate", half);
  SensitivityParams longer = base;
  longer.tau *= 2.0;
  add("double_tau", longer);
  return rows;
}

std::vector<std::string> run_command(const std::string& command, const Config& c,
                                     const std::string& out_dir, std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const std::string& file) {
    return (std::filesystem::path(out_dir) / file).string();
  };
  std::vector<std::string> written;
  const auto write_table = [&](const std::string& stem, const std::string& body,
                               const KeyValues& result) {
    open_out(path(stem + ".tsv")) << body;
    open_out(path(stem + ".txt")) << sidecar_text(c, command, result);
    written.push_back(path(stem + ".tsv"));
    written.push_back(path(stem + ".txt"));
  };

  if (command == "odmr") {
    const std::vector<OdmrPoint> spectrum = odmr(c);
    std::ostringstream body;
    body << "frequency_MHz\tcontrast\n";
    for (const OdmrPoint& p : spectrum) {
      body << format_double(p.frequency) << '\t' << format_double(p.contrast) << '\n';
    }
    KeyValues result{{"points", std::to_string(spectrum.size())}};
    const auto lines = odmr_lines(species_from(c), environment_from(c), mw_direction_from(c),
                                  nuclear_from(c));
    for (std::size_t k = 0; k < lines.size(); ++k) {
      result.emplace_back("line" + std::to_string(k),
                          format_double(lines[k].frequency) + " " + format_double(lines[k].weight));
    }
    write_table("odmr", body.str(), result);
    log << "odmr: " << spectrum.size() << " points, " << lines.size() << " lines\n";
  } else if (command == "ramsey") {
    const double f = c.number("sweep", "ramsey_frequency_khz");
    const RamseyRun run = ramsey_run(c, f);
    std::ostringstream body;
    body << "time_us\tphi_model_rad\tphi_measured_rad\n";
    for (std::size_t k = 0; k < run.time.size(); ++k) {
      body << format_double(run.time[k]) << '\t' << format_double(run.phi_true[k]) << '\t'
           << format_double(run.phi[k]) << '\n';
    }
    write_table("ramsey", body.str(),
                {{"frequency_khz", format_double(f)},
                 {"fit_amplitude", format_double(run.fit.amplitude)},
                 {"fit_amplitude_se", format_double(run.fit.amplitude_se)},
                 {"fit_phase", format_double(run.fit.phase)},
                 {"fit_phase_se", format_double(run.fit.phase_se)},
                 {"fit_offset", format_double(run.fit.offset)},
                 {"fit_residual_rms", format_double(run.fit.residual_rms)}});
    log << "fit_amplitude=" << format_double(run.fit.amplitude) << "\n"
        << "fit_phase=" << format_double(run.fit.phase) << "\n"
        << "fit_offset=" << format_double(run.fit.offset) << "\n";
  } else if (command == "lockin-sweep") {
    const std::vector<LockinRow> rows = lockin_sweep(c);
    std::ostringstream body;
    body << "frequency_kHz\tmethod\tamplitude_ratio\tamplitude_ratio_se\tphase_lead_deg\t"
            "phase_lead_se_deg\tmodel_amplitude_ratio\tmodel_phase_lead_deg\n";
    for (const LockinRow& r : rows) {
      body << format_double(r.frequency_khz) << '\t' << r.method << '\t'
           << format_double(r.amplitude_ratio) << '\t' << format_double(r.amplitude_ratio_se)
           << '\t' << format_double(r.phase_lead_deg) << '\t'
           << format_double(r.phase_lead_se_deg) << '\t'
           << format_double(r.model_amplitude_ratio) << '\t'
           << format_double(r.model_phase_lead_deg) << '\n';
    }
    write_table("lockin_sweep", body.str(), {{"rows", std::to_string(rows.size())}});
    log << "lockin-sweep: " << rows.size() << " frequencies\n";
  } else if (command == "ac-scan" || command == "dc-scan") {
    const bool ac = command == "ac-scan";
    const ScanResult r = ac ? ac_scan(c) : dc_scan(c);
    const std::string stem = ac ? "ac_scan" : "dc_scan";
    const std::string config_text = c.resolved_text() + "\n";
    for (const auto& [q, suffix] : {std::pair{MapQuantity::Phi, "_phi"},
                                    std::pair{MapQuantity::Field, "_field"}}) {
      const auto files = render_map(r, q, path(stem + suffix), config_text);
      written.insert(written.end(), files.begin(), files.end());
    }
    for (const std::string& w : r.warnings) log << "warning: " << w << '\n';
    log << command << ": " << r.nx() << " x " << r.ny() << " pixels\n";
  } else if (command == "sensitivity") {
    const std::vector<SensitivityRow> rows = sensitivity_table(c);
    std::ostringstream body;
    body << "parameter_set\teta_E_V_per_um_rtHz\teta_gradient_V_per_um2_rtHz\tsnr_0.1_V_per_um\t"
            "monte_carlo_eta_E\tmonte_carlo_error\n";
    for (const SensitivityRow& r : rows) {
      body << r.label << '\t' << format_double(r.eta_e) << '\t' << format_double(r.eta_gradient)
           << '\t' << format_double(r.snr_at_0_1) << '\t' << format_double(r.monte_carlo) << '\t'
           << format_double(r.monte_carlo_error) << '\n';
    }
    write_table("sensitivity", body.str(), {{"rows", std::to_string(rows.size())}});
    log << body.str();
  } else if (command == "solve-field") {
    Grid2D grid;
    const FieldSource source = field_source_from(c, &grid);
    write_grid(grid, path("field_grid"), c.resolved_text() + "\n");
    written.push_back(path("field_grid.bin"));
    written.push_back(path("field_grid.txt"));
    std::ostringstream body;
    body << "x_um\tE_zeta_V_per_um\tdE_zeta_dx_V_per_um2\n";
    for (std::size_t k = 0; k < source.profile.x.size(); ++k) {
      body << format_double(source.profile.x[k]) << '\t'
           << format_double(source.profile.e_zeta[k]) << '\t'
           << format_double(source.gradient[k]) << '\n';
    }
    write_table("field_profile", body.str(),
                {{"height_um", format_double(source.profile.height)},
                 {"iterations", std::to_string(grid.iterations)},
                 {"residual", format_double(grid.residual)},
                 {"snap_distance_um", format_double(grid.snap_distance)}});
    log << "solve-field: " << grid.nx << " x " << grid.nz << " nodes, " << grid.iterations
        << " iterations, residual " << format_double(grid.residual) << '\n';
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
  return written;
}

}  // namespace nvscan
