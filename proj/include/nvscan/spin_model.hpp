#pragma once

// NV ground-state spin Hamiltonian: electron S=1, optionally coupled to the
// nitrogen nuclear spin (I=1/2 for 15N, I=1 for 14N).
//
// Basis ordering: electron m_S = (+1, 0, -1) (x) nuclear m_I descending.
// Units: MHz, G, V/um.

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace nvscan {

enum class Isotope { N14, N15 };

struct NVSpecies {
  Isotope isotope = Isotope::N15;
  double zero_field_splitting = 2870.0;  // D_gs, MHz
  double gamma_e = 2.8;                  // MHz/G
  double gamma_n = -4.316e-4;            // MHz/G (external constant, not fitted)
  double a_par = 3.65;                   // MHz
  double a_perp = 3.03;                  // MHz
  double quadrupole = 0.0;               // MHz, 14N only
  double d_perp = 0.17;                  // MHz per V/um
  double d_par = 0.0035;                 // MHz per V/um

  static NVSpecies nv15();
  static NVSpecies nv14();

  int nuclear_dim() const { return isotope == Isotope::N15 ? 2 : 3; }
};

/// Whether the nuclear spin is part of the Hilbert space.
enum class NuclearSpin { Ignore, Include };

struct FieldEnvironment {
  Eigen::Vector3d b = Eigen::Vector3d::Zero();  // G, NV frame (z along NV axis)
  Eigen::Vector3d e = Eigen::Vector3d::Zero();  // V/um, NV frame

  double b_perp() const;
  double phi_b() const;
  double e_perp() const;
  double phi_e() const;

  /// Field with transverse magnitudes and azimuths; axial components zero.
  static FieldEnvironment transverse(double b_perp, double phi_b, double e_perp = 0.0,
                                     double phi_e = 0.0);
};

struct SpinHamiltonian {
  int nuclear_dim = 1;
  Eigen::MatrixXcd matrix;

  int dim() const { return static_cast<int>(matrix.rows()); }
};

struct EigenSystem {
  Eigen::VectorXd energies;  // ascending, MHz
  Eigen::MatrixXcd states;   // orthonormal columns
  int nuclear_dim = 1;

  int dim() const { return static_cast<int>(energies.size()); }
};

SpinHamiltonian build_hamiltonian(const NVSpecies& species, const FieldEnvironment& env,
                                  NuclearSpin nuclear = NuclearSpin::Include);

/// Analytic trace of the Hamiltonian terms (used to validate the assembly).
double analytic_trace(const NVSpecies& species, const FieldEnvironment& env,
                      NuclearSpin nuclear = NuclearSpin::Include);

/// Hermitian eigendecomposition with deterministic ordering and phases.
///
/// Energies ascend; ties are broken by the basis index of each vector's
/// largest component. Inside an exactly degenerate cluster the basis is
/// fixed by diagonalizing the basis-index operator, and every vector is
/// rotated so its largest component is real and positive.
/// Throws std::invalid_argument on non-Hermitian input.
EigenSystem diagonalize(const SpinHamiltonian& h);
EigenSystem diagonalize(const Eigen::MatrixXcd& matrix, int nuclear_dim = 1);

/// max_k ||H v_k - lambda_k v_k||
double max_residual(const Eigen::MatrixXcd& matrix, const EigenSystem& eig);

/// Second-order splitting of the |+>/|-> pair under a transverse field:
///   gamma^2 B_perp^2 / D - 2 d_perp E_perp cos(2 phi_B + phi_E).
double perturbative_splitting(const NVSpecies& species, double b_perp, double phi_b,
                              double e_perp, double phi_e);

/// Exact |+>/|-> splitting of the electron-only Hamiltonian (top two levels).
double exact_splitting(const NVSpecies& species, const FieldEnvironment& env);

/// Electron manifolds of a Hamiltonian with electron dimension 3: the lowest
/// nuclear_dim states form |0>, the next nuclear_dim |->, the top nuclear_dim |+>.
enum class Manifold { Zero, Minus, Plus };

Manifold manifold_of(const EigenSystem& eig, int index);

struct Transition {
  int from = 0;
  int to = 0;
  double frequency = 0.0;   // MHz, |E_to - E_from|
  double efficiency = 0.0;  // |<from| B1.S |to>|^2 normalized to the strongest entry
};

struct TransitionTable {
  std::vector<Transition> entries;

  std::vector<Transition> between(const EigenSystem& eig, Manifold lower, Manifold upper) const;
};

/// All pair transitions (i < j) for a linearly polarized MW field along
/// `mw_direction`. The operator acts on the electron subspace only.
TransitionTable transition_elements(const EigenSystem& eig, const Eigen::Vector3d& mw_direction);

struct OdmrLine {
  double frequency = 0.0;  // MHz
  double weight = 0.0;     // efficiency averaged over the |0> sublevels
};

struct OdmrPoint {
  double frequency = 0.0;  // MHz
  double contrast = 0.0;   // relative dip depth, 0 = no dip
};

struct FrequencyGrid {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

/// Lines from the |0> manifold to every |+-> state. Lines with vanishing
/// efficiency are dropped.
std::vector<OdmrLine> odmr_lines(const NVSpecies& species, const FieldEnvironment& env,
                                 const Eigen::Vector3d& mw_direction,
                                 NuclearSpin nuclear = NuclearSpin::Include);

/// Sum of Lorentzian dips (FWHM = line_width) evaluated on `grid`. With the
/// default grid the span covers every line with 10 line widths of margin.
std::vector<OdmrPoint> odmr_spectrum(const NVSpecies& species, const FieldEnvironment& env,
                                     const Eigen::Vector3d& mw_direction, double line_width,
                                     FrequencyGrid grid = {},
                                     NuclearSpin nuclear = NuclearSpin::Include);

/// Per-eigenstate Stark sensitivity dE_k/dE_perp (MHz per V/um) for a
/// transverse field applied at azimuth phi_e, by central differences.
Eigen::VectorXd stark_slopes(const NVSpecies& species, const FieldEnvironment& env, double phi_e,
                             double step = 1e-3, NuclearSpin nuclear = NuclearSpin::Include);

/// Plain-text dump, one matrix row per line, entries "re,im" with round-trip precision.
void write_matrix(std::ostream& out, const Eigen::MatrixXcd& matrix);

}  // namespace nvscan
