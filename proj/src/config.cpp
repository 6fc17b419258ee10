#include "nvscan/config.hpp"

#include "nvscan/format.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nvscan {

namespace {

struct Default {
  const char* section;
  const char* key;
  const char* value;
};

// Schema and defaults. "auto" means the value is derived at run time.
constexpr Default kSchema[] = {
    {"species", "isotope", "15"},
    {"species", "d_gs", "2870"},
    {"species", "gamma_e", "2.8"},
    {"species", "gamma_n", "auto"},
    {"species", "a_par", "auto"},
    {"species", "a_perp", "auto"},
    {"species", "quadrupole", "auto"},
    {"species", "d_perp", "0.17"},
    {"species", "d_par", "0.0035"},

    {"environment", "b_x", "73"},
    {"environment", "b_y", "0"},
    {"environment", "b_z", "0"},
    {"environment", "e_x", "0"},
    {"environment", "e_y", "0"},
    {"environment", "e_z", "0"},
    {"environment", "nuclear", "include"},

    {"odmr", "mw_azimuth_deg", "30"},
    {"odmr", "mw_polar_deg", "90"},
    {"odmr", "line_width", "1"},
    {"odmr", "f_start", "auto"},
    {"odmr", "f_stop", "auto"},
    {"odmr", "f_step", "auto"},

    {"screening", "cutoff_khz", "35.4"},
    {"screening", "dielectric_factor", "0.41"},

    {"geometry", "bias", "1"},
    {"geometry", "centre_width", "1"},
    {"geometry", "side_width", "2"},
    {"geometry", "gap", "0.5"},
    {"geometry", "thickness", "0.15"},
    {"geometry", "conductors", "auto"},
    {"geometry", "substrate_permittivity", "3.8"},
    {"geometry", "x_min", "-13.6"},
    {"geometry", "x_max", "13.6"},
    {"geometry", "z_min", "-10.4"},
    {"geometry", "z_max", "10.4"},
    {"geometry", "spacing", "0.025"},
    {"geometry", "tol", "1e-9"},
    {"geometry", "method", "mgcg"},
    {"geometry", "max_iterations", "0"},

    {"projection", "phi_deg", "20"},
    {"projection", "theta_deg", "45"},

    {"probe", "pillar_count", "7"},
    {"probe", "pillar_spacing", "7"},
    {"probe", "diameters", "0.8 0.3 0.3 0.3 0.3 0.3 0.8"},
    {"probe", "nv_depth", "0.04"},
    {"probe", "tilt_deg", "0.395139"},
    {"probe", "contact_pillar", "0"},
    {"probe", "sensing_pillar", "1"},
    {"probe", "height", "auto"},
    {"probe", "gradient_smoothing", "1"},

    {"motion", "mode", "clang"},
    {"motion", "frequency_khz", "auto"},
    {"motion", "amplitude", "auto"},
    {"motion", "direction_deg", "30"},
    {"motion", "beta", "-0.03"},
    {"motion", "validity_threshold", "0.1"},

    {"sequence", "kind", "xy4"},
    {"sequence", "repeats", "1"},
    {"sequence", "tau", "auto"},
    {"sequence", "final_phase", "1.5707963267948966"},
    {"sequence", "pi_duration", "0"},
    {"sequence", "init", "2"},
    {"sequence", "readout", "0.2"},

    {"coherence", "t2_star", "1.5"},
    {"coherence", "t2_base", "10"},
    {"coherence", "stretch", "1.5"},
    {"coherence", "pulse_scaling", "0.6666666666666666"},

    {"readout", "count_rate", "1e5"},
    {"readout", "contrast", "0.2"},
    {"readout", "window", "0.2"},
    {"readout", "init", "2"},
    {"readout", "shot_noise", "false"},

    {"scan", "x_start", "-2"},
    {"scan", "x_stop", "2"},
    {"scan", "x_step", "0.02"},
    {"scan", "y_count", "1"},
    {"scan", "y_step", "0.02"},
    {"scan", "n_avg", "1000000"},
    {"scan", "unwrap", "true"},
    {"scan", "drive_vpp", "0.96"},
    {"scan", "drive_freq_khz", "250"},
    {"scan", "v_dc", "16"},

    {"sweep", "frequencies_khz", "4 12 30 200 800 1200"},
    {"sweep", "split_khz", "50"},
    {"sweep", "ramsey_offset", "4"},
    {"sweep", "ramsey_spacing", "4"},
    {"sweep", "ramsey_tau", "0.8"},
    {"sweep", "ramsey_count", "125"},
    {"sweep", "ramsey_amplitude", "5"},
    {"sweep", "ramsey_frequency_khz", "12"},
    {"sweep", "dd_tau", "8"},
    {"sweep", "dd_amplitude", "0.5"},
    {"sweep", "phase_points", "8"},
    {"sweep", "n_avg", "1e10"},

    {"sensitivity", "tau", "8"},
    {"sensitivity", "amplitude", "0.013"},
    {"sensitivity", "trials", "10000"},

    {"run", "seed", "1"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string name(const std::string& section, const std::string& key) {
  return section + "." + key;
}

}  // namespace

Config::Config() {
  for (const Default& d : kSchema) entries_.push_back({d.section, d.key, d.value});
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str());
}

Config Config::from_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config parse error: " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (section == "result") continue;
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : body) c.set(section, key, value.data());
  }
  return c;
}

const Config::Entry& Config::find(const std::string& section, const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.section == section && e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + name(section, key) + "'");
}

Config::Entry* Config::find_mutable(const std::string& section, const std::string& key) {
  for (Entry& e : entries_) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  Entry* e = find_mutable(section, key);
  if (e == nullptr) throw ConfigError("unknown config key '" + name(section, key) + "'");
  const std::string v = trim(value);
  if (v.empty()) throw ConfigError("empty value for config key '" + name(section, key) + "'");
  e->value = v;
}

const std::string& Config::get(const std::string& section, const std::string& key) const {
  return find(section, key).value;
}

bool Config::is_auto(const std::string& section, const std::string& key) const {
  return get(section, key) == "auto";
}

double Config::number(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key '" + name(section, key) + "' is not a number: '" + v + "'");
  }
}

std::int64_t Config::integer(const std::string& section, const std::string& key) const {
  const double v = number(section, key);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw ConfigError("config key '" + name(section, key) + "' must be an integer");
  }
  return static_cast<std::int64_t>(v);
}

std::uint64_t Config::unsigned_integer(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + name(section, key) + "' must be a non-negative integer");
  }
  return out;
}

bool Config::flag(const std::string& section, const std::string& key) const {
  std::string v = get(section, key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + name(section, key) + "' must be true or false");
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  std::string text = get(section, key);
  std::replace(text.begin(), text.end(), ',', ' ');
  for (const std::string& token : split_ws(text)) {
    try {
      out.push_back(parse_double(token));
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key '" + name(section, key) + "' has a non-numeric entry '" +
                        token + "'");
    }
  }
  return out;
}

std::string Config::resolved_text() const {
  std::ostringstream out;
  std::string current;
  for (const Entry& e : entries_) {
    if (e.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << e.section << "]\n";
      current = e.section;
    }
    out << e.key << '=' << e.value << '\n';
  }
  return out.str();
}

}  // namespace nvscan
