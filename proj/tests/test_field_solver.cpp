#include "nvscan/field_solver.hpp"
#include "nvscan/format.hpp"
#include "nvscan/units.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace nvscan;

namespace {

SolverOptions coarse(double spacing = 0.05) {
  SolverOptions o;
  o.spacing = spacing;
  return o;
}

// Harmonic in each layer with continuous potential and normal flux at z = 0.
double layered_exact(double x, double z, double eps) {
  const double k = kPi / 2.0;
  const double c = z > 0.0 ? eps : 1.0;
  return std::sin(k * x) * (std::cosh(k * z) + c * std::sinh(k * z));
}

ElectrodeGeometry2D layered_problem(double eps) {
  ElectrodeGeometry2D g;
  g.domain = {-1.0, 1.0, -1.0, 1.0};
  g.substrate_permittivity = eps;
  g.boundary_potential = [eps](double x, double z) { return layered_exact(x, z, eps); };
  return g;
}

double layered_error(double spacing) {
  const ElectrodeGeometry2D g = layered_problem(3.8);
  const Grid2D grid = solve_laplace(g, coarse(spacing));
  double err = 0.0;
  for (int j = 0; j < grid.nz; ++j)
    for (int i = 0; i < grid.nx; ++i)
      err = std::max(err, std::abs(grid.at(i, j) - layered_exact(grid.x(i), grid.z(j), 3.8)));
  return err;
}

}  // namespace

TEST_CASE("parallel plate field is V/d") {
  const Domain d{-2.0, 2.0, -2.0, 2.0};
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::parallel_plate(2.0, 1.0, 0.1, d), coarse());
  const FieldProfile p = field_at_z(grid, 0.0);
  for (std::size_t k = 0; k < p.x.size(); ++k) {
    CHECK(p.ez[k] == doctest::Approx(-0.5).epsilon(1e-3));
    CHECK(std::abs(p.ex[k]) < 1e-6);
  }
}

TEST_CASE("both methods converge to the tolerance and agree") {
  const ElectrodeGeometry2D g = ElectrodeGeometry2D::default_device(1.0);
  SolverOptions o = coarse(0.1);
  const Grid2D mg = solve_laplace(g, o);
  o.method = SolverMethod::SOR;
  const Grid2D sor = solve_laplace(g, o);
  CHECK(laplace_residual(g, mg) <= o.tol);
  CHECK(laplace_residual(g, sor) <= o.tol);
  CHECK(mg.residual_history.back() == doctest::Approx(mg.residual));
  double diff = 0.0;
  for (std::size_t k = 0; k < mg.potential.size(); ++k)
    diff = std::max(diff, std::abs(mg.potential[k] - sor.potential[k]));
  CHECK(diff < 1e-6);
}

TEST_CASE("superposition with random potentials") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  ElectrodeGeometry2D base = ElectrodeGeometry2D::default_device(1.0);
  const std::size_t n = base.conductors.size();
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);

  ElectrodeGeometry2D all = base;
  for (std::size_t k = 0; k < n; ++k) all.conductors[k].potential = v[k];
  SolverOptions o = coarse(0.1);
  o.tol = 1e-10;
  const Grid2D total = solve_laplace(all, o);

  std::vector<double> sum(total.potential.size(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    ElectrodeGeometry2D one = base;
    for (std::size_t m = 0; m < n; ++m) one.conductors[m].potential = m == k ? v[k] : 0.0;
    const Grid2D part = solve_laplace(one, o);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += part.potential[i];
  }
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    scale = std::max(scale, std::abs(total.potential[i]));
    diff = std::max(diff, std::abs(total.potential[i] - sum[i]));
  }
  CHECK(diff / scale < 1e-8);
}

TEST_CASE("mirror symmetry of the default device") {
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::default_device(1.0), coarse());
  const FieldProfile p = field_at_height(grid, 0.14);
  const std::size_t n = p.x.size();
  REQUIRE(std::abs(p.x.front() + p.x.back()) < 1e-12);
  double scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) scale = std::max({scale, std::abs(p.ex[k]), std::abs(p.ez[k])});
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(p.ex[k] + p.ex[n - 1 - k]) < 1e-8 * scale);
    CHECK(std::abs(p.ez[k] - p.ez[n - 1 - k]) < 1e-8 * scale);
  }
}

TEST_CASE("antisymmetric biasing flips the parity") {
  ElectrodeGeometry2D g = ElectrodeGeometry2D::default_device(0.0);
  g.conductors[0].potential = -1.0;
  g.conductors[2].potential = 1.0;
  const Grid2D grid = solve_laplace(g, coarse());
  const FieldProfile p = field_at_height(grid, 0.14);
  const std::size_t n = p.x.size();
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(p.ex[k] - p.ex[n - 1 - k]) < 1e-8);
    CHECK(std::abs(p.ez[k] + p.ez[n - 1 - k]) < 1e-8);
  }
}

TEST_CASE("gap-centre field decays with height") {
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::default_device(16.0), coarse(0.025));
  const ProjectionAxis axis;
  double last = 1e300;
  for (double h = 0.04; h <= 0.3 + 1e-9; h += 0.02) {
    const FieldProfile p = field_at_height(grid, h);
    const std::size_t k = static_cast<std::size_t>(std::lround((0.75 - p.x.front()) / p.spacing));
    const double mag = std::hypot(p.ex[k], p.ez[k]);
    CHECK(mag < last);
    last = mag;
  }
  (void)axis;
}

TEST_CASE("gradient of the device profile peaks at the gap edges") {
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::default_device(16.0), coarse(0.025));
  const ZetaProfile z = project_zeta(field_at_height(grid, 0.14), ProjectionAxis{});
  const std::vector<double> g = gradient_x(z.x, z.e_zeta);
  double peak = 0.0, peak_x = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (z.x[k] > 0.25 && z.x[k] < 1.25 && std::abs(g[k]) > peak) {
      peak = std::abs(g[k]);
      peak_x = z.x[k];
    }
  }
  CHECK((std::abs(peak_x - 0.5) < 0.1 || std::abs(peak_x - 1.0) < 0.1));
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (z.x[k] > 0.4 && z.x[k] < 1.1) {
      lo = std::min(lo, g[k]);
      hi = std::max(hi, g[k]);
    }
  }
  CHECK(lo < -0.25 * peak);
  CHECK(hi > 0.25 * peak);
}

TEST_CASE("projection onto the NV axis") {
  FieldProfile p;
  p.x = {0.0, 1.0};
  p.ex = {2.0, -1.0};
  p.ez = {3.0, 5.0};
  const ZetaProfile vertical = project_zeta(p, {0.0, 0.0});
  CHECK(vertical.e_zeta[0] == doctest::Approx(3.0));
  const ZetaProfile horizontal = project_zeta(p, {0.0, kPi / 2});
  CHECK(horizontal.e_zeta[1] == doctest::Approx(-1.0));
  const ZetaProfile tilted = project_zeta(p, ProjectionAxis{});
  CHECK(tilted.e_zeta[0] == doctest::Approx(0.66446 * 2.0 + 0.70711 * 3.0).epsilon(1e-4));
  CHECK(tilted.at(0.5) == doctest::Approx(0.5 * (tilted.e_zeta[0] + tilted.e_zeta[1])));
  CHECK_THROWS_AS(tilted.at(1.5), std::out_of_range);
}

TEST_CASE("finite-difference gradients") {
  std::vector<double> x, lin, quad;
  for (int k = 0; k < 21; ++k) {
    x.push_back(-1.0 + 0.1 * k);
    lin.push_back(3.0 * x.back() + 1.0);
    quad.push_back(x.back() * x.back());
  }
  for (double g : gradient_x(x, lin)) CHECK(g == doctest::Approx(3.0));
  const std::vector<double> gq = gradient_x(x, quad);
  for (std::size_t k = 1; k + 1 < x.size(); ++k) CHECK(gq[k] == doctest::Approx(2.0 * x[k]));
  for (double g : gradient_x(x, lin, 3)) CHECK(g == doctest::Approx(3.0));
}

TEST_CASE("layered manufactured solution converges at second order") {
  const double e1 = layered_error(0.1);
  const double e2 = layered_error(0.05);
  const double e3 = layered_error(0.025);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.15));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("device profile at 140 nm matches a 4x finer grid") {
  // Reduced domain keeps the 6.25 nm reference small; both grids share it.
  ElectrodeGeometry2D g = ElectrodeGeometry2D::default_device(16.0);
  g.domain = {-4.0, 4.0, -3.0, 3.0};
  const FieldProfile base = field_at_height(solve_laplace(g, coarse(0.025)), 0.14);
  const FieldProfile fine = field_at_height(solve_laplace(g, coarse(0.00625)), 0.14);
  double scale = 0.0;
  for (std::size_t k = 0; k < fine.x.size(); ++k) scale = std::max(scale, std::hypot(fine.ex[k], fine.ez[k]));
  double dev = 0.0;
  const double h = fine.x[1] - fine.x[0];
  for (std::size_t k = 0; k < base.x.size(); ++k) {
    const auto j = static_cast<std::size_t>(std::lround((base.x[k] - fine.x[0]) / h));
    REQUIRE(std::abs(fine.x[j] - base.x[k]) < 1e-9);
    dev = std::max(dev, std::hypot(base.ex[k] - fine.ex[j], base.ez[k] - fine.ez[j]));
  }
  CHECK(dev / scale < 0.02);
}

TEST_CASE("far boundary barely moves the near field") {
  ElectrodeGeometry2D near = ElectrodeGeometry2D::default_device(1.0);
  ElectrodeGeometry2D far = near;
  far.domain = {-20.0, 20.0, -15.0, 15.0};
  const ZetaProfile a = project_zeta(field_at_height(solve_laplace(near, coarse()), 0.09), {});
  const ZetaProfile b = project_zeta(field_at_height(solve_laplace(far, coarse()), 0.09), {});
  double peak = 0.0, diff = 0.0;
  for (double x = -2.0; x <= 2.0; x += 0.05) {
    peak = std::max(peak, std::abs(a.at(x)));
    diff = std::max(diff, std::abs(a.at(x) - b.at(x)));
  }
  CHECK(diff < 0.01 * peak);
}

TEST_CASE("iteration cap raises SolverError with history") {
  SolverOptions o = coarse(0.1);
  o.max_iterations = 2;
  try {
    solve_laplace(ElectrodeGeometry2D::default_device(), o);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.history().size() >= 2);
  }
  o.max_iterations = 0;
  o.tol = 1e-12;
  CHECK_THROWS_AS(solve_laplace(ElectrodeGeometry2D::default_device(), o), std::invalid_argument);
}

TEST_CASE("invalid geometry") {
  ElectrodeGeometry2D g = ElectrodeGeometry2D::default_device();
  g.conductors.push_back({-0.2, 0.2, 0.0, 0.1, 1.0});
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  ElectrodeGeometry2D outside = ElectrodeGeometry2D::default_device();
  outside.conductors.push_back({20.0, 21.0, 0.0, 0.1, 1.0});
  CHECK_THROWS_AS(outside.validate(), std::invalid_argument);
}

TEST_CASE("profile rows must lie inside the grid") {
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::default_device(), coarse(0.1));
  CHECK_THROWS_AS(field_at_height(grid, 50.0), std::out_of_range);
  CHECK_THROWS_AS(field_at_z(grid, -10.4), std::out_of_range);
}

TEST_CASE("grid file round-trip") {
  const Grid2D grid = solve_laplace(ElectrodeGeometry2D::default_device(), coarse(0.2));
  const auto dir = std::filesystem::temp_directory_path() / "nvscan_grid_test";
  std::filesystem::create_directories(dir);
  const std::string stem = (dir / "grid").string();
  write_grid(grid, stem, "[run]\nseed=1\n\n");
  std::ifstream bin(stem + ".bin", std::ios::binary);
  CHECK(read_f64_le(bin) == grid.potential);
  std::ifstream txt(stem + ".txt");
  std::string all((std::istreambuf_iterator<char>(txt)), std::istreambuf_iterator<char>());
  CHECK(all.rfind("[run]\nseed=1\n\n[result]\n", 0) == 0);
  CHECK(all.find("nx=" + std::to_string(grid.nx) + "\n") != std::string::npos);
  CHECK(all.find("nz=" + std::to_string(grid.nz) + "\n") != std::string::npos);
  std::filesystem::remove_all(dir);
}
