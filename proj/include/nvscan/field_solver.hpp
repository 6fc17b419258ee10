#pragma once

// 2-D electrostatics of coplanar electrode cross-sections.
//
// Coordinates: x lateral, z vertical (um). The substrate fills z < 0, air
// z > 0. Nodes sit on a uniform grid; the potential is fixed on conductor
// nodes and on the outer boundary. The discretization is a node-centred
// finite-volume scheme whose edge coefficients are exact for the layered
// permittivity: faces parallel to the interface average epsilon over the
// face (parallel combination), edges crossing it combine the layers in series.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvscan {

struct Conductor {
  double x_min = 0.0;
  double x_max = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
  double potential = 0.0;  // V
};

struct Domain {
  double x_min = -13.6;
  double x_max = 13.6;
  double z_min = -10.4;
  double z_max = 10.4;
};

struct ElectrodeGeometry2D {
  std::vector<Conductor> conductors;
  double substrate_permittivity = 3.8;
  Domain domain;
  /// Potential on the outer boundary; empty means 0.
  std::function<double(double x, double z)> boundary_potential;

  /// Three electrodes on the substrate: the centre one biased, the outer two
  /// grounded, separated by `gap`.
  static ElectrodeGeometry2D default_device(double bias = 1.0, double centre_width = 1.0,
                                            double side_width = 2.0, double gap = 0.5,
                                            double thickness = 0.15);
  /// Full-width plates at z = -separation/2 (0 V) and +separation/2 (`voltage`),
  /// uniform permittivity and a linear boundary potential between them.
  static ElectrodeGeometry2D parallel_plate(double separation, double voltage,
                                            double thickness = 0.1, Domain domain = {});

  /// Throws on overlapping conductors or conductors outside the domain.
  void validate() const;
  double top_surface() const;
  /// Largest |potential| over conductors and boundary samples, at least 1e-300.
  double potential_scale(double spacing) const;
};

enum class SolverMethod { SOR, MultigridCG };

std::string to_string(SolverMethod method);
SolverMethod parse_solver_method(const std::string& text);

struct SolverOptions {
  double spacing = 0.025;  // um
  double tol = 1e-9;       // max |residual| / diagonal / potential scale
  int max_iterations = 0;  // 0 = method default
  SolverMethod method = SolverMethod::MultigridCG;
  double omega = 0.0;  // SOR relaxation, 0 = optimal estimate
};

struct Grid2D {
  int nx = 0;  // nodes along x
  int nz = 0;  // nodes along z
  double x0 = 0.0;
  double z0 = 0.0;
  double spacing = 0.0;
  std::vector<double> potential;     // row-major, index j * nx + i
  std::vector<std::uint8_t> fixed;   // 1 on conductor and boundary nodes
  double snap_distance = 0.0;        // largest geometry shift when snapping to nodes
  double top_surface = 0.0;          // snapped top metal surface, um
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  SolverMethod method = SolverMethod::MultigridCG;

  double x(int i) const { return x0 + i * spacing; }
  double z(int j) const { return z0 + j * spacing; }
  double at(int i, int j) const { return potential[static_cast<std::size_t>(j) * nx + i]; }
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Throws SolverError when the iteration cap is reached.
Grid2D solve_laplace(const ElectrodeGeometry2D& geom, const SolverOptions& options = {});

/// max |residual| / diagonal / scale over free nodes of a solved grid.
double laplace_residual(const ElectrodeGeometry2D& geom, const Grid2D& grid);

struct FieldProfile {
  std::vector<double> x;   // um
  std::vector<double> ex;  // V/um
  std::vector<double> ez;  // V/um
  double height = 0.0;     // above the top metal surface, um
  double spacing = 0.0;
  double residual = 0.0;
};

/// E = -grad V by central differences on the rows bracketing z = top + h,
/// linearly interpolated. Throws std::out_of_range when the row is outside
/// [z0 + h_grid, z_max - 2 h_grid].
FieldProfile field_at_height(const Grid2D& grid, double height);
/// Same sampling at an absolute z; `height` in the result is z - top_surface.
FieldProfile field_at_z(const Grid2D& grid, double z);

struct ProjectionAxis {
  double phi = 0.3490658503988659;    // azimuth, rad (20 deg)
  double theta = 0.7853981633974483;  // zenith, rad (45 deg)
};

struct ZetaProfile {
  std::vector<double> x;
  std::vector<double> e_zeta;
  double height = 0.0;
  double spacing = 0.0;
  double residual = 0.0;

  /// Linear interpolation; throws std::out_of_range outside the sampled span.
  double at(double xq) const;
};

/// E_zeta = E_x cos(phi) sin(theta) + E_z cos(theta); E_y = 0 in the cross-section.
ZetaProfile project_zeta(const FieldProfile& p, const ProjectionAxis& axis);

/// Central differences, one-sided at the ends. `smoothing` > 1 applies a
/// centred moving average of that many samples to the input first.
std::vector<double> gradient_x(const std::vector<double>& x, const std::vector<double>& values,
                               int smoothing = 1);

/// Little-endian float64 row-major potentials at `<stem>.bin`. `<stem>.txt` holds
/// `extra_sidecar` verbatim, then a [result] section with dimensions and solver stats.
void write_grid(const Grid2D& grid, const std::string& stem, const std::string& extra_sidecar = {});
void write_profile(std::ostream& out, const FieldProfile& p);

}  // namespace nvscan
