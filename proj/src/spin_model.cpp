#include "nvscan/spin_model.hpp"

#include "nvscan/format.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace nvscan {

namespace {

using cd = std::complex<double>;
using Eigen::MatrixXcd;

struct SpinOperators {
  MatrixXcd x, y, z;
};

// Spin-s operators in the m descending basis.
SpinOperators spin_operators(int dim) {
  const double s = 0.5 * (dim - 1);
  MatrixXcd raise = MatrixXcd::Zero(dim, dim);
  MatrixXcd z = MatrixXcd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = s - k;
    z(k, k) = m;
    if (k > 0) {
      // <m+1| S+ |m> sits at (k-1, k)
      raise(k - 1, k) = std::sqrt(s * (s + 1) - m * (m + 1));
    }
  }
  const MatrixXcd lower = raise.adjoint();
  SpinOperators ops;
  ops.x = 0.5 * (raise + lower);
  ops.y = cd(0.0, -0.5) * (raise - lower);
  ops.z = z;
  return ops;
}

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

void require_finite(const NVSpecies& sp, const FieldEnvironment& env) {
  const double values[] = {sp.zero_field_splitting, sp.gamma_e, sp.gamma_n, sp.a_par,
                           sp.a_perp, sp.quadrupole, sp.d_perp, sp.d_par};
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("NVSpecies: non-finite constant");
  }
  if (!env.b.allFinite() || !env.e.allFinite()) {
    throw std::invalid_argument("FieldEnvironment: non-finite field");
  }
}

int largest_component(const Eigen::VectorXcd& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::abs(v(k)) >= peak * (1.0 - 1e-9)) return static_cast<int>(k);
  }
  return 0;
}

}  // namespace

NVSpecies NVSpecies::nv15() { return NVSpecies{}; }

NVSpecies NVSpecies::nv14() {
  NVSpecies sp;
  sp.isotope = Isotope::N14;
  sp.gamma_n = 3.077e-4;
  sp.a_par = 2.2;
  sp.a_perp = 2.2;
  sp.quadrupole = -5.01;
  return sp;
}

double FieldEnvironment::b_perp() const { return std::hypot(b.x(), b.y()); }
double FieldEnvironment::phi_b() const { return std::atan2(b.y(), b.x()); }
double FieldEnvironment::e_perp() const { return std::hypot(e.x(), e.y()); }
double FieldEnvironment::phi_e() const { return std::atan2(e.y(), e.x()); }

FieldEnvironment FieldEnvironment::transverse(double b_perp, double phi_b, double e_perp,
                                              double phi_e) {
  FieldEnvironment env;
  env.b = {b_perp * std::cos(phi_b), b_perp * std::sin(phi_b), 0.0};
  env.e = {e_perp * std::cos(phi_e), e_perp * std::sin(phi_e), 0.0};
  return env;
}

SpinHamiltonian build_hamiltonian(const NVSpecies& sp, const FieldEnvironment& env,
                                  NuclearSpin nuclear) {
  require_finite(sp, env);
  const SpinOperators s = spin_operators(3);
  const MatrixXcd sz2 = s.z * s.z;

  MatrixXcd electron = sp.zero_field_splitting * sz2;
  electron += sp.gamma_e * (env.b.x() * s.x + env.b.y() * s.y + env.b.z() * s.z);
  electron += sp.d_par * env.e.z() * sz2;
  electron += sp.d_perp * env.e.x() * (s.y * s.y - s.x * s.x);
  electron += sp.d_perp * env.e.y() * (s.x * s.y + s.y * s.x);

  SpinHamiltonian h;
  if (nuclear == NuclearSpin::Ignore) {
    h.nuclear_dim = 1;
    h.matrix = electron;
    return h;
  }

  const int n = sp.nuclear_dim();
  const SpinOperators i = spin_operators(n);
  const MatrixXcd id_n = MatrixXcd::Identity(n, n);
  const MatrixXcd id_e = MatrixXcd::Identity(3, 3);

  MatrixXcd full = kron(electron, id_n);
  full += sp.a_par * kron(s.z, i.z);
  full += sp.a_perp * (kron(s.x, i.x) + kron(s.y, i.y));
  full += sp.gamma_n * kron(id_e, env.b.x() * i.x + env.b.y() * i.y + env.b.z() * i.z);
  if (sp.isotope == Isotope::N14) {
    full += sp.quadrupole * kron(id_e, i.z * i.z);
  }
  h.nuclear_dim = n;
  h.matrix = std::move(full);
  return h;
}

double analytic_trace(const NVSpecies& sp, const FieldEnvironment& env, NuclearSpin nuclear) {
  // Tr(Sz^2) = 2, Tr(Sx^2) = Tr(Sy^2), every linear spin operator is traceless.
  const int n = nuclear == NuclearSpin::Include ? sp.nuclear_dim() : 1;
  double trace = 2.0 * n * (sp.zero_field_splitting + sp.d_par * env.e.z());
  if (nuclear == NuclearSpin::Include && sp.isotope == Isotope::N14) {
    trace += 3.0 * 2.0 * sp.quadrupole;  // Tr(1_3) Tr(Iz^2)
  }
  return trace;
}

EigenSystem diagonalize(const SpinHamiltonian& h) { return diagonalize(h.matrix, h.nuclear_dim); }

EigenSystem diagonalize(const MatrixXcd& matrix, int nuclear_dim) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw std::invalid_argument("diagonalize: matrix must be square and non-empty");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("diagonalize: matrix is not Hermitian");
  }

  const Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(matrix);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("diagonalize: eigensolver failed");
  }
  Eigen::VectorXd energies = solver.eigenvalues();
  MatrixXcd states = solver.eigenvectors();
  const Eigen::Index dim = energies.size();

  // Canonical basis inside degenerate clusters.
  const double cluster_tol = 1e-10 * std::max(1.0, energies.cwiseAbs().maxCoeff());
  Eigen::VectorXcd index_op(dim);
  for (Eigen::Index k = 0; k < dim; ++k) index_op(k) = static_cast<double>(k);
  for (Eigen::Index begin = 0; begin < dim;) {
    Eigen::Index end = begin + 1;
    while (end < dim && energies(end) - energies(end - 1) <= cluster_tol) ++end;
    const Eigen::Index m = end - begin;
    if (m > 1) {
      const MatrixXcd sub = states.middleCols(begin, m);
      const MatrixXcd projected = sub.adjoint() * index_op.asDiagonal() * sub;
      const Eigen::SelfAdjointEigenSolver<MatrixXcd> inner(0.5 * (projected + projected.adjoint()));
      states.middleCols(begin, m) = sub * inner.eigenvectors();
    }
    begin = end;
  }

  // Largest component real and positive.
  std::vector<int> peak(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const int p = largest_component(states.col(k));
    peak[k] = p;
    const cd c = states(p, k);
    states.col(k) *= std::conj(c) / std::abs(c);
  }

  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(energies(a) - energies(b)) > cluster_tol) return energies(a) < energies(b);
    return peak[a] < peak[b];
  });

  EigenSystem eig;
  eig.nuclear_dim = nuclear_dim;
  eig.energies.resize(dim);
  eig.states.resize(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    eig.energies(k) = energies(order[k]);
    eig.states.col(k) = states.col(order[k]);
  }
  return eig;
}

double max_residual(const MatrixXcd& matrix, const EigenSystem& eig) {
  double worst = 0.0;
  for (int k = 0; k < eig.dim(); ++k) {
    const Eigen::VectorXcd v = eig.states.col(k);
    worst = std::max(worst, (matrix * v - eig.energies(k) * v).norm());
  }
  return worst;
}

double perturbative_splitting(const NVSpecies& sp, double b_perp, double phi_b, double e_perp,
                              double phi_e) {
  if (b_perp < 0.0 || e_perp < 0.0) {
    throw std::invalid_argument("perturbative_splitting: magnitudes must be non-negative");
  }
  const double zeeman = sp.gamma_e * b_perp;
  return zeeman * zeeman / sp.zero_field_splitting -
         2.0 * sp.d_perp * e_perp * std::cos(2.0 * phi_b + phi_e);
}

double exact_splitting(const NVSpecies& sp, const FieldEnvironment& env) {
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, env, NuclearSpin::Ignore));
  return eig.energies(2) - eig.energies(1);
}

Manifold manifold_of(const EigenSystem& eig, int index) {
  const int n = eig.nuclear_dim;
  if (eig.dim() != 3 * n || index < 0 || index >= eig.dim()) {
    throw std::invalid_argument("manifold_of: index outside a 3 x nuclear_dim system");
  }
  switch (index / n) {
    case 0: return Manifold::Zero;
    case 1: return Manifold::Minus;
    default: return Manifold::Plus;
  }
}

std::vector<Transition> TransitionTable::between(const EigenSystem& eig, Manifold lower,
                                                 Manifold upper) const {
  std::vector<Transition> out;
  for (const Transition& t : entries) {
    if (manifold_of(eig, t.from) == lower && manifold_of(eig, t.to) == upper) out.push_back(t);
  }
  return out;
}

TransitionTable transition_elements(const EigenSystem& eig, const Eigen::Vector3d& mw_direction) {
  const double norm = mw_direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("transition_elements: MW direction must be a non-zero vector");
  }
  const int n = eig.nuclear_dim;
  if (eig.dim() != 3 * n) {
    throw std::invalid_argument("transition_elements: electron dimension must be 3");
  }
  const Eigen::Vector3d u = mw_direction / norm;
  const SpinOperators s = spin_operators(3);
  const MatrixXcd drive =
      kron(u.x() * s.x + u.y() * s.y + u.z() * s.z, MatrixXcd::Identity(n, n));
  const MatrixXcd elements = eig.states.adjoint() * drive * eig.states;

  TransitionTable table;
  double strongest = 0.0;
  for (int i = 0; i < eig.dim(); ++i) {
    for (int j = i + 1; j < eig.dim(); ++j) {
      Transition t;
      t.from = i;
      t.to = j;
      t.frequency = std::abs(eig.energies(j) - eig.energies(i));
      t.efficiency = std::norm(elements(i, j));
      strongest = std::max(strongest, t.efficiency);
      table.entries.push_back(t);
    }
  }
  if (strongest > 0.0) {
    for (Transition& t : table.entries) t.efficiency /= strongest;
  }
  return table;
}

std::vector<OdmrLine> odmr_lines(const NVSpecies& sp, const FieldEnvironment& env,
                                 const Eigen::Vector3d& mw_direction, NuclearSpin nuclear) {
  const EigenSystem eig = diagonalize(build_hamiltonian(sp, env, nuclear));
  const TransitionTable table = transition_elements(eig, mw_direction);
  std::vector<OdmrLine> lines;
  for (const Transition& t : table.entries) {
    if (manifold_of(eig, t.from) != Manifold::Zero || manifold_of(eig, t.to) == Manifold::Zero) {
      continue;
    }
    const double weight = t.efficiency / eig.nuclear_dim;
    if (weight > 1e-9) lines.push_back({t.frequency, weight});
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const OdmrLine& a, const OdmrLine& b) { return a.frequency < b.frequency; });
  return lines;
}

std::vector<OdmrPoint> odmr_spectrum(const NVSpecies& sp, const FieldEnvironment& env,
                                     const Eigen::Vector3d& mw_direction, double line_width,
                                     FrequencyGrid grid, NuclearSpin nuclear) {
  if (!(line_width > 0.0)) throw std::invalid_argument("odmr_spectrum: line_width must be > 0");
  const std::vector<OdmrLine> lines = odmr_lines(sp, env, mw_direction, nuclear);
  if (grid.step <= 0.0) {
    double lo = sp.zero_field_splitting;
    double hi = sp.zero_field_splitting;
    for (const OdmrLine& l : lines) {
      lo = std::min(lo, l.frequency);
      hi = std::max(hi, l.frequency);
    }
    grid = {lo - 10.0 * line_width, hi + 10.0 * line_width, line_width / 20.0};
  }
  if (grid.stop < grid.start) throw std::invalid_argument("odmr_spectrum: empty frequency grid");

  const double hwhm2 = 0.25 * line_width * line_width;
  const auto count = static_cast<long>(std::floor((grid.stop - grid.start) / grid.step + 1e-9)) + 1;
  std::vector<OdmrPoint> spectrum;
  spectrum.reserve(count);
  for (long k = 0; k < count; ++k) {
    const double f = grid.start + k * grid.step;
    double depth = 0.0;
    for (const OdmrLine& l : lines) {
      const double df = f - l.frequency;
      depth += l.weight * hwhm2 / (df * df + hwhm2);
    }
    spectrum.push_back({f, depth});
  }
  return spectrum;
}

Eigen::VectorXd stark_slopes(const NVSpecies& sp, const FieldEnvironment& env, double phi_e,
                             double step, NuclearSpin nuclear) {
  const Eigen::Vector3d dir(std::cos(phi_e), std::sin(phi_e), 0.0);
  FieldEnvironment up = env;
  FieldEnvironment down = env;
  up.e += step * dir;
  down.e -= step * dir;
  const EigenSystem plus = diagonalize(build_hamiltonian(sp, up, nuclear));
  const EigenSystem minus = diagonalize(build_hamiltonian(sp, down, nuclear));
  return (plus.energies - minus.energies) / (2.0 * step);
}

void write_matrix(std::ostream& out, const MatrixXcd& matrix) {
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(matrix(i, j).real()) << ',' << format_double(matrix(i, j).imag());
    }
    out << '\n';
  }
}

}  // namespace nvscan
