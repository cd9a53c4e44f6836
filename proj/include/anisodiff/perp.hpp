#ifndef ANISODIFF_PERP_HPP_
#define ANISODIFF_PERP_HPP_

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "anisodiff/grid.hpp"
#include "anisodiff/sbp.hpp"

namespace anisodiff {

enum class YBoundary { Periodic, Dirichlet };

// Penalty parameters of the boundary SATs. The stored values follow the
// stability constraints tau_x1 = -1, tau_x0 = -(1 + tau_x2), tau_x2 >= 0,
// tau_y1 = 1/2, tau_y2 = -1/2 and tau_y0 <= -(kappa/(2 dy)) max(1/h_1, 1/h_ny).
struct PenaltySet {
  double tau_x0 = -1.0;
  double tau_x1 = -1.0;
  double tau_x2 = 0.0;
  double tau_y0 = 0.0;
  double tau_y1 = 0.5;
  double tau_y2 = -0.5;
};

inline PenaltySet default_penalties(const Grid2D& grid, double kappa_perp, int order,
                                    double tau_x2 = 0.0) {
  if (tau_x2 < 0.0) throw std::invalid_argument("default_penalties: tau_x2 must be >= 0");
  if (kappa_perp < 0.0) throw std::invalid_argument("default_penalties: kappa_perp must be >= 0");
  PenaltySet p;
  p.tau_x2 = tau_x2;
  p.tau_x0 = -(1.0 + tau_x2);
  p.tau_x1 = -1.0;
  std::vector<double> hy = sbp_norm_weights(order, grid.ny());
  const double dy = grid.gy.dx;
  p.tau_y0 = -(kappa_perp / (2.0 * dy)) * std::max(1.0 / hy.front(), 1.0 / hy.back());
  p.tau_y1 = 0.5;
  p.tau_y2 = -0.5;
  return p;
}

using BoundaryFn = std::function<double(double coord, double t)>;

struct DefinitenessReport {
  double symmetry_defect = 0.0;
  double min_eigenvalue = 0.0;
  double scale = 0.0;  // max |A| entry, for context
  bool pass(double tol) const { return symmetry_defect <= tol && min_eigenvalue >= -tol; }
};

// P_perp = Dxx + Dyy + SAT_x + SAT_y. Dirichlet data enters only through the
// SAT residual (u - g); with homogeneous data -H P_perp is symmetric positive
// semi-definite for the default penalties.
//
// The first-derivative transpose terms of both SATs are applied with the
// polarity that makes H P_perp symmetric as a matrix. The quadratic form (and
// hence the energy estimate) is the same as for the nominal signs, but only
// this convention admits the H-norm CG solve.
struct PerpOperator {
  const Grid2D* grid = nullptr;
  Sbp2D ops;
  PenaltySet pen;
  double kappa_perp = 1.0;
  YBoundary ybc = YBoundary::Periodic;
  BoundaryFn g_left;    // x = x_L, argument y
  BoundaryFn g_right;   // x = x_R
  BoundaryFn g_bottom;  // y = y_L (Dirichlet-y only), argument x
  BoundaryFn g_top;     // y = y_R

  int size() const { return grid->size(); }
  std::vector<double> h_diag() const { return ops.h_diag(); }

  // SAT_x applied to the residual w = u - g; adds into out. An empty g means
  // homogeneous data. g carries left-boundary values in the i = 0 slots and
  // right-boundary values in the i = nx-1 slots of a full-length grid vector.
  void add_sat_x(std::span<const double> u, std::span<const double> g,
                 std::span<double> out) const {
    const int nx = grid->nx(), ny = grid->ny();
    const double dx = ops.x.dx;
    const auto& hx = ops.x.norm.h;
    const double c0l = pen.tau_x0 * kappa_perp / ((dx * hx.front()) * (dx * hx.front()));
    const double c0r = pen.tau_x0 * kappa_perp / ((dx * hx.back()) * (dx * hx.back()));
    const double c1 = -pen.tau_x1 * kappa_perp;  // symmetrizing polarity
    const int bw = ops.x.d1_bw;
    for (int j = 0; j < ny; ++j) {
      const double wl = u[j] - (g.empty() ? 0.0 : g[j]);
      const double wr = u[(nx - 1) * ny + j] - (g.empty() ? 0.0 : g[(nx - 1) * ny + j]);
      out[j] += c0l * wl;
      out[(nx - 1) * ny + j] += c0r * wr;
      // D_x^T (B_nx - B_1x) w spreads the boundary residuals through the
      // transposed boundary rows of D1.
      for (int k = 0; k < bw; ++k) {
        out[k * ny + j] += c1 / (dx * hx[k]) * (-ops.x.d1_row_first[k]) * wl;
        const int i = nx - bw + k;
        out[i * ny + j] += c1 / (dx * hx[i]) * ops.x.d1_row_last[k] * wr;
      }
    }
  }

  // Periodic SAT in y; adds into out.
  void add_sat_y_periodic(std::span<const double> u, std::span<double> out) const {
    const int nx = grid->nx(), ny = grid->ny();
    const double dy = ops.y.dx;
    const auto& hy = ops.y.norm.h;
    const int bw = ops.y.d1_bw;
    const double c1 = -pen.tau_y1 * kappa_perp;
    const double c2 = -pen.tau_y2 * kappa_perp;
    for (int i = 0; i < nx; ++i) {
      const double* line = u.data() + i * ny;
      double* oline = out.data() + i * ny;
      const double d = line[0] - line[ny - 1];
      oline[0] += pen.tau_y0 * d / (dy * hy.front());
      oline[ny - 1] += pen.tau_y0 * (-d) / (dy * hy.back());
      // derivative differences at the two periodic edges
      double s0 = 0.0, s1 = 0.0;
      for (int k = 0; k < bw; ++k) {
        s0 += ops.y.d1_row_first[k] * line[k];
        s1 += ops.y.d1_row_last[k] * line[ny - bw + k];
      }
      const double q = s0 - s1;
      oline[0] += c2 * q / (dy * hy.front());
      oline[ny - 1] += c2 * q / (dy * hy.back());
      // D_y^T (E_1 - E_ny) u = d * (row_0 + row_{ny-1} of D1y, transposed)
      for (int k = 0; k < bw; ++k) {
        oline[k] += c1 * d * ops.y.d1_row_first[k] / (dy * hy[k]);
        oline[ny - bw + k] += c1 * d * ops.y.d1_row_last[k] / (dy * hy[ny - bw + k]);
      }
    }
  }

  // Dirichlet SAT in y (same structure as SAT_x, rotated); residual w = u - g.
  void add_sat_y_dirichlet(std::span<const double> u, std::span<const double> g,
                           std::span<double> out) const {
    const int nx = grid->nx(), ny = grid->ny();
    const double dy = ops.y.dx;
    const auto& hy = ops.y.norm.h;
    const double c0b = pen.tau_x0 * kappa_perp / ((dy * hy.front()) * (dy * hy.front()));
    const double c0t = pen.tau_x0 * kappa_perp / ((dy * hy.back()) * (dy * hy.back()));
    const double c1 = -pen.tau_x1 * kappa_perp;
    const int bw = ops.y.d1_bw;
    for (int i = 0; i < nx; ++i) {
      const double* line = u.data() + i * ny;
      double* oline = out.data() + i * ny;
      const double wb = line[0] - (g.empty() ? 0.0 : g[i * ny]);
      const double wt = line[ny - 1] - (g.empty() ? 0.0 : g[i * ny + ny - 1]);
      oline[0] += c0b * wb;
      oline[ny - 1] += c0t * wt;
      for (int k = 0; k < bw; ++k) {
        oline[k] += c1 / (dy * hy[k]) * (-ops.y.d1_row_first[k]) * wb;
        const int j = ny - bw + k;
        oline[j] += c1 / (dy * hy[j]) * ops.y.d1_row_last[k] * wt;
      }
    }
  }

  std::vector<double> boundary_vector_x(double t) const {
    std::vector<double> g(grid->size(), 0.0);
    const int nx = grid->nx(), ny = grid->ny();
    for (int j = 0; j < ny; ++j) {
      const double yj = grid->y(j);
      g[j] = g_left ? g_left(yj, t) : 0.0;
      g[(nx - 1) * ny + j] = g_right ? g_right(yj, t) : 0.0;
    }
    return g;
  }

  std::vector<double> boundary_vector_y(double t) const {
    std::vector<double> g(grid->size(), 0.0);
    const int nx = grid->nx(), ny = grid->ny();
    for (int i = 0; i < nx; ++i) {
      const double xi = grid->x(i);
      g[i * ny] = g_bottom ? g_bottom(xi, t) : 0.0;
      g[i * ny + ny - 1] = g_top ? g_top(xi, t) : 0.0;
    }
    return g;
  }

  // Full action including inhomogeneous Dirichlet data at time t.
  void apply(std::span<const double> u, double t, std::span<double> out) const {
    check_length(u, *grid, "PerpOperator::apply");
    ops.dxx(u, out);
    ops.dyy_add(u, out);
    std::vector<double> gx = boundary_vector_x(t);
    add_sat_x(u, gx, out);
    if (ybc == YBoundary::Periodic) {
      add_sat_y_periodic(u, out);
    } else {
      std::vector<double> gy = boundary_vector_y(t);
      add_sat_y_dirichlet(u, gy, out);
    }
  }

  // Linear part (g = 0): the operator CG inverts.
  void apply_homogeneous(std::span<const double> u, std::span<double> out) const {
    ops.dxx(u, out);
    ops.dyy_add(u, out);
    add_sat_x(u, {}, out);
    if (ybc == YBoundary::Periodic)
      add_sat_y_periodic(u, out);
    else
      add_sat_y_dirichlet(u, {}, out);
  }

  // Affine data contribution S_g(t) = P(0, t); stage-1 right-hand sides add
  // dt * (F + S_g).
  std::vector<double> data_term(double t) const {
    std::vector<double> zero(grid->size(), 0.0);
    std::vector<double> out(grid->size(), 0.0);
    apply(zero, t, out);
    return out;
  }

  // Dense assembly of the homogeneous action, column by column.
  Eigen::MatrixXd assemble_dense() const {
    const int N = grid->size();
    Eigen::MatrixXd P(N, N);
    std::vector<double> e(N, 0.0), col(N);
    for (int c = 0; c < N; ++c) {
      e[c] = 1.0;
      apply_homogeneous(e, col);
      e[c] = 0.0;
      for (int r = 0; r < N; ++r) P(r, c) = col[r];
    }
    return P;
  }

  // Theorem-2 audit: assemble A = -H P and report symmetry defect and the most
  // negative eigenvalue.
  DefinitenessReport audit_definiteness(int dense_cap = 4096) const {
    const int N = grid->size();
    if (N > dense_cap)
      throw std::invalid_argument("audit_definiteness: grid size " + std::to_string(N) +
                                  " exceeds dense audit cap " + std::to_string(dense_cap));
    Eigen::MatrixXd P = assemble_dense();
    std::vector<double> hd = h_diag();
    Eigen::MatrixXd A(N, N);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) A(r, c) = -hd[r] * P(r, c);
    DefinitenessReport rep;
    rep.symmetry_defect = (A - A.transpose()).cwiseAbs().maxCoeff();
    rep.scale = A.cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    return rep;
  }
};

inline PerpOperator make_perp_operator(const Grid2D& grid, int order, double kappa_perp,
                                       YBoundary ybc = YBoundary::Periodic,
                                       double tau_x2 = 0.0) {
  PerpOperator p;
  p.grid = &grid;
  std::vector<double> kx(grid.nx(), kappa_perp);
  std::vector<double> ky(grid.ny(), kappa_perp);
  p.ops = extend_2d(build_sbp(order, grid.nx(), grid.gx.dx, kx),
                    build_sbp(order, grid.ny(), grid.gy.dx, ky), grid);
  p.pen = default_penalties(grid, kappa_perp, order, tau_x2);
  p.kappa_perp = kappa_perp;
  p.ybc = ybc;
  return p;
}

}  // namespace anisodiff

#endif  // ANISODIFF_PERP_HPP_
