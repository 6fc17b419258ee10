#include "nvscan/field_solver.hpp"

#include "nvscan/format.hpp"
#include "nvscan/units.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

namespace nvscan {

namespace {

// Length of [a, b] inside z < 0 and z > 0.
std::pair<double, double> layer_split(double a, double b) {
  const double below = std::clamp(0.0, a, b) - a;
  return {below, (b - a) - below};
}

// Mean permittivity over [a, b]: layers side by side.
double eps_parallel(double a, double b, double eps_sub) {
  const auto [below, above] = layer_split(a, b);
  return (eps_sub * below + above) / (b - a);
}

// Effective permittivity of [a, b]: layers in series.
double eps_series(double a, double b, double eps_sub) {
  const auto [below, above] = layer_split(a, b);
  return (b - a) / (below / eps_sub + above);
}

struct Level {
  int nx = 0;
  int nz = 0;
  double h = 0.0;
  std::vector<double> ce;  // edge (i,j)-(i+1,j)
  std::vector<double> cn;  // edge (i,j)-(i,j+1)
  std::vector<double> diag;
  std::vector<std::uint8_t> fixed;

  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * nz; }
};

Level make_level(int nx, int nz, double h, double z0, double eps_sub,
                 std::vector<std::uint8_t> fixed) {
  Level lv;
  lv.nx = nx;
  lv.nz = nz;
  lv.h = h;
  lv.fixed = std::move(fixed);
  lv.ce.assign(lv.size(), 0.0);
  lv.cn.assign(lv.size(), 0.0);
  lv.diag.assign(lv.size(), 0.0);
  for (int j = 0; j < nz; ++j) {
    const double z = z0 + j * h;
    const double c_east = eps_parallel(z - 0.5 * h, z + 0.5 * h, eps_sub);
    const double c_north = eps_series(z, z + h, eps_sub);
    for (int i = 0; i < nx; ++i) {
      lv.ce[lv.idx(i, j)] = i + 1 < nx ? c_east : 0.0;
      lv.cn[lv.idx(i, j)] = j + 1 < nz ? c_north : 0.0;
    }
  }
  for (int j = 1; j + 1 < nz; ++j) {
    for (int i = 1; i + 1 < nx; ++i) {
      const std::size_t p = lv.idx(i, j);
      lv.diag[p] = lv.ce[p] + lv.ce[p - 1] + lv.cn[p] + lv.cn[p - nx];
    }
  }
  return lv;
}

// sum of c_nb * v_nb around an interior node
inline double neighbour_sum(const Level& lv, const std::vector<double>& v, std::size_t p) {
  return lv.ce[p] * v[p + 1] + lv.ce[p - 1] * v[p - 1] + lv.cn[p] * v[p + lv.nx] +
         lv.cn[p - lv.nx] * v[p - lv.nx];
}

// Deterministic dot product over free nodes: per-row partials, summed in order.
double dot(const Level& lv, const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> rows(lv.nz, 0.0);
#pragma omp parallel for schedule(static)
  for (int j = 1; j < lv.nz - 1; ++j) {
    double s = 0.0;
    for (int i = 1; i < lv.nx - 1; ++i) {
      const std::size_t p = lv.idx(i, j);
      if (!lv.fixed[p]) s += a[p] * b[p];
    }
    rows[j] = s;
  }
  return std::accumulate(rows.begin(), rows.end(), 0.0);
}

// r = b - A x on free nodes (b = 0 for the potential problem), zero elsewhere.
void residual(const Level& lv, const std::vector<double>& rhs, const std::vector<double>& x,
              std::vector<double>& r) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < lv.nz; ++j) {
    for (int i = 0; i < lv.nx; ++i) {
      const std::size_t p = lv.idx(i, j);
      if (lv.fixed[p]) {
        r[p] = 0.0;
        continue;
      }
      const double b = rhs.empty() ? 0.0 : rhs[p];
      r[p] = b + neighbour_sum(lv, x, p) - lv.diag[p] * x[p];
    }
  }
}

double scaled_residual_norm(const Level& lv, const std::vector<double>& r, double scale) {
  double worst = 0.0;
  for (std::size_t p = 0; p < lv.size(); ++p) {
    if (!lv.fixed[p]) worst = std::max(worst, std::abs(r[p]) / lv.diag[p]);
  }
  return worst / scale;
}

// One Gauss-Seidel pass over one colour for A e = rhs.
void gs_colour(const Level& lv, const std::vector<double>& rhs, std::vector<double>& e, int colour) {
#pragma omp parallel for schedule(static)
  for (int j = 1; j < lv.nz - 1; ++j) {
    for (int i = 1 + ((j + 1 + colour) & 1); i < lv.nx - 1; i += 2) {
      const std::size_t p = lv.idx(i, j);
      if (!lv.fixed[p]) e[p] = (rhs[p] + neighbour_sum(lv, e, p)) / lv.diag[p];
    }
  }
}

class Multigrid {
 public:
  Multigrid(std::vector<Level> levels) : levels_(std::move(levels)) { factor_coarsest(); }

  const Level& fine() const { return levels_.front(); }

  // Symmetric V-cycle: z ~ A^-1 r.
  void apply(const std::vector<double>& r, std::vector<double>& z) { cycle(0, r, z); }

 private:
  void factor_coarsest() {
    const Level& lv = levels_.back();
    map_.assign(lv.size(), -1);
    int n = 0;
    for (std::size_t p = 0; p < lv.size(); ++p) {
      if (!lv.fixed[p]) map_[p] = n++;
    }
    free_count_ = n;
    if (n == 0) return;
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 1; j < lv.nz - 1; ++j) {
      for (int i = 1; i < lv.nx - 1; ++i) {
        const std::size_t p = lv.idx(i, j);
        if (lv.fixed[p]) continue;
        const int row = map_[p];
        trip.emplace_back(row, row, lv.diag[p]);
        const std::pair<std::size_t, double> nb[] = {{p + 1, lv.ce[p]},
                                                      {p - 1, lv.ce[p - 1]},
                                                      {p + lv.nx, lv.cn[p]},
                                                      {p - lv.nx, lv.cn[p - lv.nx]}};
        for (const auto& [q, c] : nb) {
          if (map_[q] >= 0) trip.emplace_back(row, map_[q], -c);
        }
      }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(a);
    if (solver_->info() != Eigen::Success) throw std::runtime_error("coarse factorization failed");
  }

  void cycle(std::size_t l, const std::vector<double>& rhs, std::vector<double>& e) {
    const Level& lv = levels_[l];
    e.assign(lv.size(), 0.0);
    if (l + 1 == levels_.size()) {
      if (free_count_ == 0) return;
      Eigen::VectorXd b(free_count_);
      for (std::size_t p = 0; p < lv.size(); ++p) {
        if (map_[p] >= 0) b(map_[p]) = rhs[p];
      }
      const Eigen::VectorXd x = solver_->solve(b);
      for (std::size_t p = 0; p < lv.size(); ++p) {
        if (map_[p] >= 0) e[p] = x(map_[p]);
      }
      return;
    }
    gs_colour(lv, rhs, e, 0);
    gs_colour(lv, rhs, e, 1);

    std::vector<double> r(lv.size());
    residual(lv, rhs, e, r);
    const Level& cv = levels_[l + 1];
    std::vector<double> rc(cv.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (int jc = 1; jc < cv.nz - 1; ++jc) {
      for (int ic = 1; ic < cv.nx - 1; ++ic) {
        const std::size_t pc = cv.idx(ic, jc);
        if (cv.fixed[pc]) continue;
        double s = 0.0;
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            const double w = (di == 0 ? 1.0 : 0.5) * (dj == 0 ? 1.0 : 0.5);
            s += w * r[lv.idx(2 * ic + di, 2 * jc + dj)];
          }
        }
        rc[pc] = s;
      }
    }
    std::vector<double> ec;
    cycle(l + 1, rc, ec);
#pragma omp parallel for schedule(static)
    for (int j = 1; j < lv.nz - 1; ++j) {
      const int jc = j / 2;
      const bool odd_j = j & 1;
      for (int i = 1; i < lv.nx - 1; ++i) {
        const std::size_t p = lv.idx(i, j);
        if (lv.fixed[p]) continue;
        const int ic = i / 2;
        const bool odd_i = i & 1;
        double v = ec[cv.idx(ic, jc)];
        if (odd_i) v = 0.5 * (v + ec[cv.idx(ic + 1, jc)]);
        if (odd_j) {
          double w = ec[cv.idx(ic, jc + 1)];
          if (odd_i) w = 0.5 * (w + ec[cv.idx(ic + 1, jc + 1)]);
          v = 0.5 * (v + w);
        }
        e[p] += v;
      }
    }
    gs_colour(lv, rhs, e, 1);
    gs_colour(lv, rhs, e, 0);
  }

  std::vector<Level> levels_;
  std::vector<int> map_;
  int free_count_ = 0;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

struct Discretization {
  Grid2D grid;
  Level level;
};

Discretization discretize(const ElectrodeGeometry2D& geom, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("solve_laplace: spacing must be positive");
  geom.validate();
  const Domain& d = geom.domain;
  Grid2D g;
  g.spacing = h;
  g.x0 = d.x_min;
  g.z0 = d.z_min;
  g.nx = static_cast<int>(std::lround((d.x_max - d.x_min) / h)) + 1;
  g.nz = static_cast<int>(std::lround((d.z_max - d.z_min) / h)) + 1;
  if (g.nx < 3 || g.nz < 3) throw std::invalid_argument("solve_laplace: domain smaller than 2 cells");
  g.snap_distance = std::max(std::abs(g.x(g.nx - 1) - d.x_max), std::abs(g.z(g.nz - 1) - d.z_max));

  const std::size_t n = static_cast<std::size_t>(g.nx) * g.nz;
  g.potential.assign(n, 0.0);
  g.fixed.assign(n, 0);
  for (int j = 0; j < g.nz; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i == 0 || j == 0 || i == g.nx - 1 || j == g.nz - 1) {
        const std::size_t p = static_cast<std::size_t>(j) * g.nx + i;
        g.fixed[p] = 1;
        g.potential[p] = geom.boundary_potential ? geom.boundary_potential(g.x(i), g.z(j)) : 0.0;
      }
    }
  }
  g.top_surface = -std::numeric_limits<double>::infinity();
  for (const Conductor& c : geom.conductors) {
    const auto snap = [&](double v, double origin) {
      const long k = std::lround((v - origin) / h);
      g.snap_distance = std::max(g.snap_distance, std::abs(origin + k * h - v));
      return static_cast<int>(k);
    };
    const int i0 = std::max(0, snap(c.x_min, g.x0));
    const int i1 = std::min(g.nx - 1, snap(c.x_max, g.x0));
    const int j0 = std::max(0, snap(c.z_min, g.z0));
    const int j1 = std::min(g.nz - 1, snap(c.z_max, g.z0));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const std::size_t p = static_cast<std::size_t>(j) * g.nx + i;
        g.fixed[p] = 1;
        g.potential[p] = c.potential;
      }
    }
    g.top_surface = std::max(g.top_surface, g.z(j1));
  }
  if (geom.conductors.empty()) g.top_surface = 0.0;

  Level lv = make_level(g.nx, g.nz, h, g.z0, geom.substrate_permittivity, g.fixed);
  return {std::move(g), std::move(lv)};
}

double fixed_scale(const Grid2D& g) {
  double s = 0.0;
  for (std::size_t p = 0; p < g.potential.size(); ++p) {
    if (g.fixed[p]) s = std::max(s, std::abs(g.potential[p]));
  }
  return s > 0.0 ? s : 1.0;
}

std::vector<Level> build_hierarchy(Level fine, double z0, double eps_sub) {
  std::vector<Level> levels;
  levels.push_back(std::move(fine));
  while (true) {
    const Level& lv = levels.back();
    const int cx = lv.nx - 1;
    const int cz = lv.nz - 1;
    if (cx % 2 != 0 || cz % 2 != 0 || std::min(cx, cz) < 16) break;
    const int nx = cx / 2 + 1;
    const int nz = cz / 2 + 1;
    std::vector<std::uint8_t> fixed(static_cast<std::size_t>(nx) * nz);
    for (int j = 0; j < nz; ++j) {
      for (int i = 0; i < nx; ++i) {
        fixed[static_cast<std::size_t>(j) * nx + i] = lv.fixed[lv.idx(2 * i, 2 * j)];
      }
    }
    levels.push_back(make_level(nx, nz, 2.0 * lv.h, z0, eps_sub, std::move(fixed)));
  }
  return levels;
}

void solve_sor(Grid2D& g, const Level& lv, const SolverOptions& opt, double scale) {
  double omega = opt.omega;
  if (omega <= 0.0) {
    const double rho = 0.5 * (std::cos(kPi / (g.nx - 1)) + std::cos(kPi / (g.nz - 1)));
    omega = 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
  }
  const int cap = opt.max_iterations > 0 ? opt.max_iterations : 200000;
  std::vector<double>& v = g.potential;
  for (int it = 1; it <= cap; ++it) {
    double worst = 0.0;
    for (int colour = 0; colour < 2; ++colour) {
#pragma omp parallel for schedule(static) reduction(max : worst)
      for (int j = 1; j < lv.nz - 1; ++j) {
        for (int i = 1 + ((j + 1 + colour) & 1); i < lv.nx - 1; i += 2) {
          const std::size_t p = lv.idx(i, j);
          if (lv.fixed[p]) continue;
          const double delta = omega * (neighbour_sum(lv, v, p) / lv.diag[p] - v[p]);
          v[p] += delta;
          worst = std::max(worst, std::abs(delta));
        }
      }
    }
    worst /= scale;
    g.residual_history.push_back(worst);
    g.iterations = it;
    if (worst < opt.tol) return;
  }
  throw SolverError("SOR did not converge within " + std::to_string(cap) + " sweeps",
                    g.residual_history);
}

void apply_operator(const Level& lv, const std::vector<double>& v, std::vector<double>& out) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < lv.nz; ++j) {
    for (int i = 0; i < lv.nx; ++i) {
      const std::size_t p = lv.idx(i, j);
      out[p] = lv.fixed[p] ? 0.0 : lv.diag[p] * v[p] - neighbour_sum(lv, v, p);
    }
  }
}

// Multigrid-preconditioned conjugate gradients on the free nodes.
void solve_mgcg(Grid2D& g, std::vector<Level> levels, const SolverOptions& opt, double scale) {
  Multigrid mg(std::move(levels));
  const Level& lv = mg.fine();
  const int cap = opt.max_iterations > 0 ? opt.max_iterations : 1000;
  std::vector<double>& x = g.potential;
  std::vector<double> r(lv.size()), z, ap(lv.size());
  residual(lv, {}, x, r);
  double metric = scaled_residual_norm(lv, r, scale);
  g.residual_history.push_back(metric);
  if (metric < opt.tol) return;

  mg.apply(r, z);
  std::vector<double> dir = z;
  double rz = dot(lv, r, z);
  for (int it = 1; it <= cap; ++it) {
    apply_operator(lv, dir, ap);
    const double alpha = rz / dot(lv, dir, ap);
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < lv.size(); ++p) {
      if (lv.fixed[p]) continue;
      x[p] += alpha * dir[p];
      r[p] -= alpha * ap[p];
    }
    metric = scaled_residual_norm(lv, r, scale);
    g.residual_history.push_back(metric);
    g.iterations = it;
    if (metric < opt.tol) return;
    mg.apply(r, z);
    const double rz_next = dot(lv, r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < lv.size(); ++p) dir[p] = z[p] + beta * dir[p];
  }
  throw SolverError("multigrid-CG did not converge within " + std::to_string(cap) + " iterations",
                    g.residual_history);
}

// Row of central-difference field components at grid row j.
void field_row(const Grid2D& g, int j, std::vector<double>& ex, std::vector<double>& ez) {
  const double inv = 1.0 / (2.0 * g.spacing);
  for (int i = 1; i < g.nx - 1; ++i) {
    ex[i - 1] = -(g.at(i + 1, j) - g.at(i - 1, j)) * inv;
    ez[i - 1] = -(g.at(i, j + 1) - g.at(i, j - 1)) * inv;
  }
}

}  // namespace

ElectrodeGeometry2D ElectrodeGeometry2D::default_device(double bias, double centre_width,
                                                        double side_width, double gap,
                                                        double thickness) {
  ElectrodeGeometry2D g;
  const double half = 0.5 * centre_width;
  g.conductors.push_back({-half - gap - side_width, -half - gap, 0.0, thickness, 0.0});
  g.conductors.push_back({-half, half, 0.0, thickness, bias});
  g.conductors.push_back({half + gap, half + gap + side_width, 0.0, thickness, 0.0});
  return g;
}

ElectrodeGeometry2D ElectrodeGeometry2D::parallel_plate(double separation, double voltage,
                                                        double thickness, Domain domain) {
  ElectrodeGeometry2D g;
  g.domain = domain;
  g.substrate_permittivity = 1.0;
  const double lo = -0.5 * separation;
  const double hi = 0.5 * separation;
  g.conductors.push_back({domain.x_min, domain.x_max, lo - thickness, lo, 0.0});
  g.conductors.push_back({domain.x_min, domain.x_max, hi, hi + thickness, voltage});
  g.boundary_potential = [=](double, double z) {
    if (z <= lo) return 0.0;
    if (z >= hi) return voltage;
    return voltage * (z - lo) / separation;
  };
  return g;
}

void ElectrodeGeometry2D::validate() const {
  const Domain& d = domain;
  if (!(d.x_max > d.x_min) || !(d.z_max > d.z_min)) {
    throw std::invalid_argument("geometry: empty domain");
  }
  if (!(substrate_permittivity > 0.0)) {
    throw std::invalid_argument("geometry: substrate permittivity must be positive");
  }
  for (std::size_t a = 0; a < conductors.size(); ++a) {
    const Conductor& c = conductors[a];
    if (!(c.x_max >= c.x_min) || !(c.z_max >= c.z_min)) {
      throw std::invalid_argument("geometry: conductor with inverted extent");
    }
    if (c.x_min < d.x_min || c.x_max > d.x_max || c.z_min < d.z_min || c.z_max > d.z_max) {
      throw std::invalid_argument("geometry: conductor outside the domain");
    }
    for (std::size_t b = a + 1; b < conductors.size(); ++b) {
      const Conductor& o = conductors[b];
      if (c.x_min < o.x_max && o.x_min < c.x_max && c.z_min < o.z_max && o.z_min < c.z_max) {
        throw std::invalid_argument("geometry: overlapping conductors");
      }
    }
  }
}

double ElectrodeGeometry2D::top_surface() const {
  double top = conductors.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const Conductor& c : conductors) top = std::max(top, c.z_max);
  return top;
}

double ElectrodeGeometry2D::potential_scale(double spacing) const {
  double s = 0.0;
  for (const Conductor& c : conductors) s = std::max(s, std::abs(c.potential));
  if (boundary_potential) {
    for (double x = domain.x_min; x <= domain.x_max; x += spacing) {
      s = std::max({s, std::abs(boundary_potential(x, domain.z_min)),
                    std::abs(boundary_potential(x, domain.z_max))});
    }
    for (double z = domain.z_min; z <= domain.z_max; z += spacing) {
      s = std::max({s, std::abs(boundary_potential(domain.x_min, z)),
                    std::abs(boundary_potential(domain.x_max, z))});
    }
  }
  return std::max(s, 1e-300);
}

std::string to_string(SolverMethod method) {
  return method == SolverMethod::SOR ? "sor" : "mgcg";
}

SolverMethod parse_solver_method(const std::string& text) {
  std::string k = text;
  std::transform(k.begin(), k.end(), k.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (k == "sor") return SolverMethod::SOR;
  if (k == "mgcg" || k == "multigrid") return SolverMethod::MultigridCG;
  throw std::invalid_argument("unknown solver method '" + text + "'");
}

Grid2D solve_laplace(const ElectrodeGeometry2D& geom, const SolverOptions& options) {
  if (!(options.tol >= 1e-10)) throw std::invalid_argument("solve_laplace: tol must be >= 1e-10");
  Discretization d = discretize(geom, options.spacing);
  Grid2D& g = d.grid;
  g.method = options.method;
  const double scale = fixed_scale(g);
  if (options.method == SolverMethod::SOR) {
    solve_sor(g, d.level, options, scale);
  } else {
    solve_mgcg(g, build_hierarchy(std::move(d.level), g.z0, geom.substrate_permittivity), options,
               scale);
  }
  g.residual = laplace_residual(geom, g);
  return std::move(d.grid);
}

double laplace_residual(const ElectrodeGeometry2D& geom, const Grid2D& grid) {
  const Level lv = make_level(grid.nx, grid.nz, grid.spacing, grid.z0,
                              geom.substrate_permittivity, grid.fixed);
  std::vector<double> r(lv.size());
  residual(lv, {}, grid.potential, r);
  return scaled_residual_norm(lv, r, fixed_scale(grid));
}

FieldProfile field_at_height(const Grid2D& grid, double height) {
  if (!(height >= 0.0)) throw std::out_of_range("field_at_height: height must be >= 0");
  return field_at_z(grid, grid.top_surface + height);
}

FieldProfile field_at_z(const Grid2D& grid, double z) {
  const double height = z - grid.top_surface;
  const double jf = (z - grid.z0) / grid.spacing;
  int j = static_cast<int>(std::floor(jf + 1e-9));
  double u = jf - j;
  if (std::abs(u) < 1e-9) u = 0.0;
  const int top_row = u == 0.0 ? j : j + 1;
  if (j < 1 || top_row > grid.nz - 3) {
    throw std::out_of_range("field_at_height: height outside the solved domain");
  }
  FieldProfile p;
  p.height = height;
  p.spacing = grid.spacing;
  p.residual = grid.residual;
  const std::size_t n = static_cast<std::size_t>(grid.nx - 2);
  p.x.resize(n);
  p.ex.resize(n);
  p.ez.resize(n);
  for (std::size_t k = 0; k < n; ++k) p.x[k] = grid.x(static_cast<int>(k) + 1);
  field_row(grid, j, p.ex, p.ez);
  if (u > 0.0) {
    std::vector<double> ex2(n), ez2(n);
    field_row(grid, j + 1, ex2, ez2);
    for (std::size_t k = 0; k < n; ++k) {
      p.ex[k] += u * (ex2[k] - p.ex[k]);
      p.ez[k] += u * (ez2[k] - p.ez[k]);
    }
  }
  return p;
}

double ZetaProfile::at(double xq) const {
  if (x.empty() || xq < x.front() || xq > x.back()) {
    throw std::out_of_range("ZetaProfile: position outside the profile");
  }
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  if (it == x.end()) return e_zeta.back();
  const std::size_t k = static_cast<std::size_t>(it - x.begin());
  const double u = (xq - x[k - 1]) / (x[k] - x[k - 1]);
  return e_zeta[k - 1] + u * (e_zeta[k] - e_zeta[k - 1]);
}

ZetaProfile project_zeta(const FieldProfile& p, const ProjectionAxis& axis) {
  ZetaProfile z;
  z.x = p.x;
  z.height = p.height;
  z.spacing = p.spacing;
  z.residual = p.residual;
  const double cx = std::cos(axis.phi) * std::sin(axis.theta);
  const double cz = std::cos(axis.theta);
  z.e_zeta.resize(p.x.size());
  for (std::size_t k = 0; k < p.x.size(); ++k) z.e_zeta[k] = cx * p.ex[k] + cz * p.ez[k];
  return z;
}

std::vector<double> gradient_x(const std::vector<double>& x, const std::vector<double>& values,
                               int smoothing) {
  const std::size_t n = x.size();
  if (n != values.size() || n < 2) throw std::invalid_argument("gradient_x: need >= 2 samples");
  if (smoothing < 1) throw std::invalid_argument("gradient_x: smoothing window must be >= 1");
  std::vector<double> v = values;
  if (smoothing > 1) {
    // The window shrinks symmetrically near the ends so linear data stays exact.
    const long last = static_cast<long>(n) - 1;
    for (std::size_t k = 0; k < n; ++k) {
      const long i = static_cast<long>(k);
      const long half = std::min({static_cast<long>(smoothing / 2), i, last - i});
      const long lo = i - half;
      const long hi = i + half;
      double s = 0.0;
      for (long q = lo; q <= hi; ++q) s += values[q];
      v[k] = s / static_cast<double>(hi - lo + 1);
    }
  }
  std::vector<double> g(n);
  g[0] = (v[1] - v[0]) / (x[1] - x[0]);
  g[n - 1] = (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2]);
  for (std::size_t k = 1; k + 1 < n; ++k) g[k] = (v[k + 1] - v[k - 1]) / (x[k + 1] - x[k - 1]);
  return g;
}

void write_grid(const Grid2D& grid, const std::string& stem, const std::string& extra_sidecar) {
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + stem + ".bin");
  write_f64_le(bin, grid.potential);
  std::ofstream txt(stem + ".txt");
  if (!txt) throw std::runtime_error("cannot write " + stem + ".txt");
  txt << extra_sidecar << "[result]\n"
      << "engine=" << kEngineVersion << "\n"
      << "format=float64-le row-major, rows along z, x fastest\n"
      << "quantity=potential_V\n"
      << "nx=" << grid.nx << "\nnz=" << grid.nz << "\n"
      << "spacing_um=" << format_double(grid.spacing) << "\n"
      << "x0_um=" << format_double(grid.x0) << "\nz0_um=" << format_double(grid.z0) << "\n"
      << "top_surface_um=" << format_double(grid.top_surface) << "\n"
      << "snap_distance_um=" << format_double(grid.snap_distance) << "\n"
      << "method=" << to_string(grid.method) << "\n"
      << "iterations=" << grid.iterations << "\n"
      << "residual=" << format_double(grid.residual) << "\n";
}

void write_profile(std::ostream& out, const FieldProfile& p) {
  out << "# h_um=" << format_double(p.height) << " spacing_um=" << format_double(p.spacing)
      << " residual=" << format_double(p.residual) << "\n"
      << "x_um\tEx_V_per_um\tEz_V_per_um\n";
  for (std::size_t k = 0; k < p.x.size(); ++k) {
    out << format_double(p.x[k]) << '\t' << format_double(p.ex[k]) << '\t'
        << format_double(p.ez[k]) << '\n';
  }
}

}  // namespace nvscan
