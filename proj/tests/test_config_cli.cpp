#include "nvscan/commands.hpp"
#include "nvscan/config.hpp"
#include "nvscan/format.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace nvscan;
namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(__FILE__).parent_path() / "data";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const std::string& env = {}) {
  const fs::path log = fs::temp_directory_path() / "nvscan_cli_log.txt";
  const std::string cmd = env + " \"" NVSCAN_CLI "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nvscan_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<double>> read_tsv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (const std::string& cell : split_ws(line)) row.push_back(parse_double(cell));
    rows.push_back(row);
  }
  return rows;
}

int dominant_dips(const fs::path& tsv) {
  const auto rows = read_tsv(tsv);
  double top = 0.0;
  for (const auto& r : rows) top = std::max(top, r[1]);
  int dips = 0;
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    if (rows[k][1] > rows[k - 1][1] && rows[k][1] >= rows[k + 1][1] && rows[k][1] > 0.5 * top) ++dips;
  }
  return dips;
}

}  // namespace

TEST_CASE("defaults and overrides") {
  Config c;
  CHECK(c.number("species", "d_gs") == 2870.0);
  CHECK(c.is_auto("probe", "height"));
  c.set("probe", "height", "0.1");
  CHECK(c.number("probe", "height") == 0.1);
  CHECK(c.numbers("sweep", "frequencies_khz").size() == 6);
  CHECK(c.flag("scan", "unwrap"));
  CHECK(c.integer("sweep", "n_avg") == 10000000000LL);
}

TEST_CASE("unknown and malformed keys name the key") {
  try {
    Config::from_string("[species]\nd_gss=1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("species.d_gss") != std::string::npos);
  }
  const Config c = Config::from_string("[readout]\ncontrast=abc\n");
  try {
    (void)c.number("readout", "contrast");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("readout.contrast") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::from_string("[nowhere]\nx=1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_string("[run]\nseed=-3\n").unsigned_integer("run", "seed"), ConfigError);
}

TEST_CASE("resolved text round-trips and ignores results") {
  Config c;
  c.set("scan", "x_step", "0.05");
  c.set("run", "seed", "99");
  const std::string text = c.resolved_text();
  const Config back = Config::from_string(text + "\n[result]\nengine=x\n");
  CHECK(back.resolved_text() == text);
}

TEST_CASE("typed views validate values") {
  Config c;
  c.set("screening", "cutoff_khz", "-1");
  CHECK_THROWS_AS(screening_from(c), ConfigError);
  Config g;
  g.set("geometry", "conductors", "-1 1 0 0.1 2; 2 3 0 0.1 0");
  const ElectrodeGeometry2D geom = geometry_from(g);
  REQUIRE(geom.conductors.size() == 2);
  CHECK(geom.conductors[0].potential == 2.0);
  g.set("geometry", "conductors", "-1 1 0 0.1");
  CHECK_THROWS_AS(geometry_from(g), ConfigError);
  Config s;
  CHECK(sequence_from(s, 250.0).tau == doctest::Approx(8.0));
  CHECK(probe_height_from(s) == doctest::Approx(0.09).epsilon(1e-4));
}

TEST_CASE("lock-in sweep reproduces the high-pass response") {
  Config c;
  c.set("readout", "shot_noise", "true");
  for (const LockinRow& r : lockin_sweep(c)) {
    CAPTURE(r.frequency_khz);
    CHECK(r.amplitude_ratio == doctest::Approx(r.model_amplitude_ratio).epsilon(0.02));
    CHECK(std::abs(r.phase_lead_deg - r.model_phase_lead_deg) < 2.0);
  }
}

TEST_CASE("cli: odmr spectra") {
  const fs::path out = scratch("odmr");
  REQUIRE(cli("odmr --out \"" + out.string() + "\"").code == 0);
  CHECK(dominant_dips(out / "odmr.tsv") == 2);

  std::ofstream(out / "zero.ini") << "[environment]\nb_x=0\nnuclear=ignore\n";
  REQUIRE(cli("odmr -c \"" + (out / "zero.ini").string() + "\" --out \"" + out.string() + "\"").code == 0);
  const auto rows = read_tsv(out / "odmr.tsv");
  auto peak = rows.front();
  for (const auto& r : rows)
    if (r[1] > peak[1]) peak = r;
  CHECK(peak[0] == doctest::Approx(2870.0));
  CHECK(dominant_dips(out / "odmr.tsv") == 1);
}

TEST_CASE("cli: exit codes") {
  const fs::path out = scratch("codes");
  std::ofstream(out / "bad.ini") << "[species]\nbogus=1\n";
  const Run bad = cli("odmr -c \"" + (out / "bad.ini").string() + "\" --out \"" + out.string() + "\"");
  CHECK(bad.code == 2);
  CHECK(bad.output.find("species.bogus") != std::string::npos);

  std::ofstream(out / "cap.ini") << "[geometry]\nspacing=0.2\nmax_iterations=1\n";
  CHECK(cli("solve-field -c \"" + (out / "cap.ini").string() + "\" --out \"" + out.string() + "\"").code == 3);
  CHECK(cli("no-such-command").code != 0);
}

TEST_CASE("cli: output directory from the environment, --out wins") {
  const fs::path env_dir = scratch("env");
  const fs::path flag_dir = scratch("flag");
  REQUIRE(cli("sensitivity", "NVSCAN_OUT_DIR=\"" + env_dir.string() + "\"").code == 0);
  CHECK(fs::exists(env_dir / "sensitivity.tsv"));
  REQUIRE(cli("sensitivity --out \"" + flag_dir.string() + "\"",
              "NVSCAN_OUT_DIR=\"" + env_dir.string() + "/unused\"").code == 0);
  CHECK(fs::exists(flag_dir / "sensitivity.tsv"));
  CHECK(!fs::exists(env_dir / "unused"));
}

TEST_CASE("cli: sensitivity table prints the canonical row") {
  const fs::path out = scratch("sens");
  const Run r = cli("sensitivity --out \"" + out.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("configured\t0.0261") != std::string::npos);
  CHECK(slurp(out / "sensitivity.tsv").find("half_count_rate\t") != std::string::npos);
}

TEST_CASE("cli: sidecar replay is bit-exact and threads do not matter") {
  const fs::path a = scratch("replay_a");
  const fs::path b = scratch("replay_b");
  const std::string fixture = (kData / "ac_fixture.ini").string();
  REQUIRE(cli("ac-scan -c \"" + fixture + "\" --threads 1 --out \"" + a.string() + "\"").code == 0);
  REQUIRE(cli("ac-scan -c \"" + (a / "ac_scan_phi.txt").string() + "\" --threads 3 --out \"" +
              b.string() + "\"").code == 0);
  for (const char* f : {"ac_scan_phi.bin", "ac_scan_phi.tsv", "ac_scan_field.bin", "ac_scan_phi.txt"})
    CHECK(slurp(a / f) == slurp(b / f));
  const std::string side = slurp(a / "ac_scan_phi.txt");
  CHECK(side.find("engine=nvscan") != std::string::npos);
  CHECK(side.find("[geometry]\n") != std::string::npos);
}

TEST_CASE("cli: golden 1-D AC scan") {
  const fs::path out = scratch("golden");
  REQUIRE(cli("ac-scan -c \"" + (kData / "ac_fixture.ini").string() + "\" --out \"" + out.string() + "\"").code == 0);
  CHECK(slurp(out / "ac_scan_phi.tsv") == slurp(kData / "ac_fixture_phi.tsv"));
}

TEST_CASE("cli: seed override changes noise only through the seed") {
  const fs::path a = scratch("seed_a");
  const fs::path b = scratch("seed_b");
  const std::string fixture = (kData / "ac_fixture.ini").string();
  REQUIRE(cli("ac-scan -c \"" + fixture + "\" --seed 8 --out \"" + a.string() + "\"").code == 0);
  REQUIRE(cli("ac-scan -c \"" + fixture + "\" --out \"" + b.string() + "\"").code == 0);
  CHECK(slurp(a / "ac_scan_phi.bin") != slurp(b / "ac_scan_phi.bin"));
  CHECK(slurp(a / "ac_scan_phi.txt").find("seed=8\n") != std::string::npos);
}

TEST_CASE("cli: every subcommand runs on a coarse config") {
  const fs::path out = scratch("all");
  std::ofstream(out / "coarse.ini") << "[geometry]\nspacing=0.1\n\n[scan]\nx_step=0.1\n\n"
                                       "[sensitivity]\ntrials=200\n";
  for (const char* cmd : kCommands) {
    CAPTURE(cmd);
    CHECK(cli(std::string(cmd) + " -c \"" + (out / "coarse.ini").string() + "\" --out \"" +
              out.string() + "\"").code == 0);
  }
  for (const char* f : {"odmr.tsv", "ramsey.tsv", "lockin_sweep.tsv", "ac_scan_phi.bin",
                        "dc_scan_field.bin", "sensitivity.tsv", "field_grid.bin", "field_profile.tsv"})
    CHECK(fs::exists(out / f));
}
