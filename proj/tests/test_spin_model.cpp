#include "nvscan/spin_model.hpp"
#include "nvscan/units.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <sstream>

using namespace nvscan;

namespace {

const Eigen::Vector3d kMwAlongX(1.0, 0.0, 0.0);
const Eigen::Vector3d kMwAlongY(0.0, 1.0, 0.0);

double branch_weight(const EigenSystem& eig, const TransitionTable& t, Manifold upper) {
  double sum = 0.0;
  for (const Transition& tr : t.between(eig, Manifold::Zero, upper)) sum += tr.efficiency;
  return sum;
}

}  // namespace

TEST_CASE("zero field electron-only Hamiltonian is diag(D, 0, D)") {
  const NVSpecies sp = NVSpecies::nv15();
  const SpinHamiltonian h = build_hamiltonian(sp, FieldEnvironment{}, NuclearSpin::Ignore);
  REQUIRE(h.dim() == 3);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(3, 3);
  expected(0, 0) = 2870.0;
  expected(2, 2) = 2870.0;
  CHECK((h.matrix - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("assembled trace matches the analytic trace") {
  for (const NVSpecies& sp : {NVSpecies::nv15(), NVSpecies::nv14()}) {
    FieldEnvironment env;
    env.b = Eigen::Vector3d(40.0, -12.0, 7.0);
    env.e = Eigen::Vector3d(1.5, 0.3, -2.0);
    for (NuclearSpin n : {NuclearSpin::Ignore, NuclearSpin::Include}) {
      const SpinHamiltonian h = build_hamiltonian(sp, env, n);
      CHECK(h.matrix.trace().real() == doctest::Approx(analytic_trace(sp, env, n)).epsilon(1e-12));
      CHECK(std::abs(h.matrix.trace().imag()) < 1e-12);
      CHECK((h.matrix - h.matrix.adjoint()).norm() < 1e-12);
    }
  }
}

TEST_CASE("diagonalize trivial matrices") {
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  d(2, 2) = 3.0;
  const EigenSystem e = diagonalize(d);
  CHECK(e.energies(0) == doctest::Approx(1.0));
  CHECK(e.energies(1) == doctest::Approx(2.0));
  CHECK(e.energies(2) == doctest::Approx(3.0));
  CHECK((e.states - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-14);

  Eigen::MatrixXcd px = Eigen::MatrixXcd::Zero(3, 3);
  px(0, 2) = 1.0;
  px(2, 0) = 1.0;
  const EigenSystem p = diagonalize(px);
  CHECK(p.energies(0) == doctest::Approx(-1.0));
  CHECK(std::abs(p.energies(1)) < 1e-14);
  CHECK(p.energies(2) == doctest::Approx(1.0));
}

TEST_CASE("random Hermitian 9x9 residual") {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) a(i, j) = {g(gen), g(gen)};
  const Eigen::MatrixXcd h = a + a.adjoint();
  const EigenSystem e = diagonalize(h);
  CHECK(max_residual(h, e) < 1e-9 * h.norm());
  CHECK((e.states.adjoint() * e.states - Eigen::MatrixXcd::Identity(9, 9)).norm() < 1e-12);
  for (int k = 1; k < 9; ++k) CHECK(e.energies(k) >= e.energies(k - 1));
}

TEST_CASE("non-Hermitian input is rejected") {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(3, 3);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(diagonalize(m), std::invalid_argument);
}

TEST_CASE("degenerate clusters get a deterministic basis") {
  const NVSpecies sp = NVSpecies::nv15();
  const SpinHamiltonian h = build_hamiltonian(sp, FieldEnvironment{}, NuclearSpin::Ignore);
  const EigenSystem a = diagonalize(h);
  const EigenSystem b = diagonalize(h);
  CHECK((a.states - b.states).norm() == 0.0);
  CHECK(std::abs(a.states(0, 1) - 1.0) < 1e-14);
  CHECK(std::abs(a.states(2, 2) - 1.0) < 1e-14);
}

TEST_CASE("splitting at 73 G against the perturbative formula") {
  const NVSpecies sp = NVSpecies::nv15();
  const double pert = perturbative_splitting(sp, 73.0, 0.0, 0.0, 0.0);
  CHECK(pert == doctest::Approx(14.5573).epsilon(1e-4));
  const double exact = exact_splitting(sp, FieldEnvironment::transverse(73.0, 0.0));
  CHECK(exact == doctest::Approx(pert).epsilon(0.01));

  CHECK(perturbative_splitting(sp, 73.0, 0.0, 1.0, 0.0) == doctest::Approx(pert - 0.34));
  CHECK(perturbative_splitting(sp, 73.0, kPi / 4, 3.0, 0.0) ==
        doctest::Approx(perturbative_splitting(sp, 73.0, kPi / 4, 0.0, 0.0)));

  const double shifted = exact_splitting(sp, FieldEnvironment::transverse(73.0, 0.0, 5.0, 0.0));
  CHECK(shifted - exact == doctest::Approx(-1.70).epsilon(0.01));
}

TEST_CASE("fourth-order bound on the perturbative splitting") {
  const NVSpecies sp = NVSpecies::nv15();
  for (double b = 30.0; b <= 120.0; b += 5.0) {
    const double exact = exact_splitting(sp, FieldEnvironment::transverse(b, 0.0));
    const double gb = sp.gamma_e * b;
    CHECK(std::abs(perturbative_splitting(sp, b, 0.0, 0.0, 0.0) - exact) <=
          5.0 * std::pow(gb, 4) / std::pow(sp.zero_field_splitting, 3));
  }
}

TEST_CASE("Stark slope of the exact splitting is -2 d_perp") {
  const NVSpecies sp = NVSpecies::nv15();
  const double h = 1e-3;
  const double up = exact_splitting(sp, FieldEnvironment::transverse(73.0, 0.0, h, 0.0));
  const double down = exact_splitting(sp, FieldEnvironment::transverse(73.0, 0.0, h, kPi));
  CHECK((up - down) / (2.0 * h) == doctest::Approx(-2.0 * sp.d_perp).epsilon(0.01));
}

TEST_CASE("weak transverse field leaves the lines nearly Stark-insensitive") {
  const NVSpecies sp = NVSpecies::nv15();
  const FieldEnvironment env = FieldEnvironment::transverse(10.0, 0.0);
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, env));
  const Eigen::VectorXd slopes = stark_slopes(sp, env, 0.0);
  const TransitionTable t = transition_elements(eig, kMwAlongX);
  for (Manifold m : {Manifold::Minus, Manifold::Plus}) {
    for (const Transition& tr : t.between(eig, Manifold::Zero, m)) {
      CHECK(std::abs(slopes(tr.to) - slopes(tr.from)) < 0.1 * 2.0 * sp.d_perp);
    }
  }
}

TEST_CASE("15N at 90 degrees: one dominant |0> -> |+> line per nuclear sublevel") {
  const NVSpecies sp = NVSpecies::nv15();
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, FieldEnvironment::transverse(73.0, 0.0)));
  const Eigen::Vector3d mw(std::cos(kPi / 6), std::sin(kPi / 6), 0.0);
  const TransitionTable t = transition_elements(eig, mw);
  const auto plus = t.between(eig, Manifold::Zero, Manifold::Plus);
  REQUIRE(plus.size() == 4);
  for (int from = 0; from < 2; ++from) {
    int strong = 0;
    for (const Transition& tr : plus)
      if (tr.from == from && tr.efficiency > 0.5) ++strong;
    CHECK(strong == 1);
  }
}

TEST_CASE("14N enumerates nine |0> -> |+> candidates") {
  const NVSpecies sp = NVSpecies::nv14();
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, FieldEnvironment::transverse(73.0, 0.0)));
  const TransitionTable t = transition_elements(eig, kMwAlongY);
  CHECK(t.between(eig, Manifold::Zero, Manifold::Plus).size() == 9);
}

TEST_CASE("MW polarization swaps the dominant branch") {
  const NVSpecies sp = NVSpecies::nv15();
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, FieldEnvironment::transverse(73.0, 0.0)));
  const TransitionTable along = transition_elements(eig, kMwAlongX);
  const TransitionTable across = transition_elements(eig, kMwAlongY);
  const bool plus_along = branch_weight(eig, along, Manifold::Plus) >
                          branch_weight(eig, along, Manifold::Minus);
  const bool plus_across = branch_weight(eig, across, Manifold::Plus) >
                           branch_weight(eig, across, Manifold::Minus);
  CHECK(plus_along != plus_across);
}

TEST_CASE("efficiencies do not depend on eigenvector phases") {
  const NVSpecies sp = NVSpecies::nv15();
  EigenSystem eig = diagonalize(build_hamiltonian(sp, FieldEnvironment::transverse(50.0, 0.4)));
  const Eigen::Vector3d mw(0.3, 0.9, 0.1);
  const TransitionTable a = transition_elements(eig, mw);
  for (int k = 0; k < eig.dim(); ++k) eig.states.col(k) *= std::polar(1.0, 0.37 * k + 1.1);
  const TransitionTable b = transition_elements(eig, mw);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t k = 0; k < a.entries.size(); ++k)
    CHECK(a.entries[k].efficiency == doctest::Approx(b.entries[k].efficiency).epsilon(1e-12));
}

TEST_CASE("ODMR spectrum at 73 G has two dominant dips") {
  const NVSpecies sp = NVSpecies::nv15();
  const FieldEnvironment env = FieldEnvironment::transverse(73.0, 0.0);
  const Eigen::Vector3d mw(std::cos(kPi / 6), std::sin(kPi / 6), 0.0);
  const auto spectrum = odmr_spectrum(sp, env, mw, 1.0, {}, NuclearSpin::Ignore);
  std::vector<double> minima;
  for (std::size_t k = 1; k + 1 < spectrum.size(); ++k) {
    if (spectrum[k].contrast > spectrum[k - 1].contrast &&
        spectrum[k].contrast >= spectrum[k + 1].contrast && spectrum[k].contrast > 0.1)
      minima.push_back(spectrum[k].frequency);
  }
  REQUIRE(minima.size() == 2);
  CHECK(minima[1] - minima[0] == doctest::Approx(14.48).epsilon(0.01));
}

TEST_CASE("zero field gives a single dip at D") {
  const auto lines = odmr_lines(NVSpecies::nv15(), FieldEnvironment{}, kMwAlongX, NuclearSpin::Ignore);
  double f = 0.0;
  for (const OdmrLine& l : lines) {
    CHECK(l.frequency == doctest::Approx(2870.0));
    f = l.frequency;
  }
  CHECK(f == doctest::Approx(2870.0));
  const auto spectrum = odmr_spectrum(NVSpecies::nv15(), FieldEnvironment{}, kMwAlongX, 1.0, {},
                                      NuclearSpin::Ignore);
  const auto peak = std::max_element(spectrum.begin(), spectrum.end(),
                                     [](const OdmrPoint& a, const OdmrPoint& b) {
                                       return a.contrast < b.contrast;
                                     });
  CHECK(peak->frequency == doctest::Approx(2870.0));
}

TEST_CASE("zero-efficiency transitions leave no dip") {
  const NVSpecies sp = NVSpecies::nv15();
  const auto lines =
      odmr_lines(sp, FieldEnvironment::transverse(73.0, 0.0), kMwAlongX, NuclearSpin::Ignore);
  CHECK(lines.size() == 1);
}

TEST_CASE("matrix dump round-trips") {
  const SpinHamiltonian h =
      build_hamiltonian(NVSpecies::nv15(), FieldEnvironment::transverse(73.0, 0.2, 1.0, 0.5));
  std::ostringstream out;
  write_matrix(out, h.matrix);
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    int col = 0;
    while (row >> cell) {
      const auto comma = cell.find(',');
      const std::complex<double> v(std::stod(cell.substr(0, comma)), std::stod(cell.substr(comma + 1)));
      CHECK(v == h.matrix(rows, col));
      ++col;
    }
    CHECK(col == h.dim());
    ++rows;
  }
  CHECK(rows == h.dim());
}
