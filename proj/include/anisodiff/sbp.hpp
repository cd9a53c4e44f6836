#ifndef ANISODIFF_SBP_HPP_
#define ANISODIFF_SBP_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisodiff/grid.hpp"

namespace anisodiff {

// Diagonal norm weights of the composite quadrature attached to each operator
// order. Interior weight is 1.
inline std::vector<double> sbp_norm_weights(int order, int n) {
  std::vector<double> h(n, 1.0);
  if (order == 2) {
    h.front() = h.back() = 0.5;
  } else if (order == 4) {
    const double w[4] = {17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0};
    for (int k = 0; k < 4; ++k) {
      h[k] = w[k];
      h[n - 1 - k] = w[k];
    }
  } else {
    throw std::invalid_argument("sbp_norm_weights: order must be 2 or 4");
  }
  return h;
}

inline int sbp_min_points(int order) { return order == 2 ? 4 : 12; }

// First derivative D1 = H^{-1} Q with Q + Q^T = diag(-1, 0, ..., 0, 1).
inline Eigen::MatrixXd sbp_d1_dense(int order, int n, double dx) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  if (order == 2) {
    for (int j = 1; j < n - 1; ++j) {
      D(j, j - 1) = -0.5;
      D(j, j + 1) = 0.5;
    }
    D(0, 0) = -1.0;
    D(0, 1) = 1.0;
    D(n - 1, n - 2) = -1.0;
    D(n - 1, n - 1) = 1.0;
  } else {
    const double c[5] = {1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0};
    for (int j = 4; j < n - 4; ++j)
      for (int k = 0; k < 5; ++k) D(j, j - 2 + k) = c[k];
    const double b[4][6] = {
        {-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0, 0.0, 0.0},
        {-1.0 / 2.0, 0.0, 1.0 / 2.0, 0.0, 0.0, 0.0},
        {4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0, 0.0},
        {3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0}};
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 6; ++k) {
        D(r, k) = b[r][k];
        D(n - 1 - r, n - 1 - k) = -b[r][k];
      }
  }
  return D / dx;
}

namespace detail {

// Second/third/fourth difference matrices with end rows extrapolated to the
// nearest full stencil. Building blocks of the dissipation-form remainder R.
inline Eigen::MatrixXd diff_matrix(int n, double dx, int p) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> st;
  if (p == 2) st = {1.0, -2.0, 1.0};
  if (p == 3) st = {-1.0, 3.0, -3.0, 1.0};
  if (p == 4) st = {1.0, -4.0, 6.0, -4.0, 1.0};
  const int w = static_cast<int>(st.size());
  const int center = p / 2;  // offset of the row's own point inside the stencil
  for (int j = 0; j < n; ++j) {
    int lo = std::clamp(j - center, 0, n - w);
    for (int k = 0; k < w; ++k) S(j, lo + k) = st[k];
  }
  double scale = 1.0;
  for (int k = 0; k < p; ++k) scale /= dx;
  return S * scale;
}

// Mean of kappa over the stencil footprint a given row of diff_matrix touches.
inline Eigen::VectorXd footprint_mean(std::span<const double> kappa, int n, int p) {
  const int w = (p == 3) ? 4 : 5;
  const int center = p / 2;
  Eigen::VectorXd m(n);
  for (int j = 0; j < n; ++j) {
    int lo = std::clamp(j - center, 0, n - w);
    double s = 0.0;
    for (int k = 0; k < w; ++k) s += kappa[lo + k];
    m(j) = s / w;
  }
  return m;
}

}  // namespace detail

// Remainder R of the fully compatible splitting M = D1^T (K H) D1 + R.
// R is assembled as a sum of S^T diag(c) S terms with c >= 0, so it is
// symmetric positive semi-definite for any positive kappa by construction.
// The interior stencil of the resulting D2 is the standard compact one.
inline Eigen::MatrixXd sbp_r_dense(int order, int n, double dx, std::span<const double> kappa) {
  if (order == 2) {
    Eigen::MatrixXd S = detail::diff_matrix(n, dx, 2);
    Eigen::VectorXd c(n);
    for (int j = 0; j < n; ++j) c(j) = kappa[j];
    c(0) = c(n - 1) = 0.0;
    const double a = dx * dx * dx / 4.0;
    return a * S.transpose() * c.asDiagonal() * S;
  }
  Eigen::MatrixXd S3 = detail::diff_matrix(n, dx, 3);
  Eigen::MatrixXd S4 = detail::diff_matrix(n, dx, 4);
  Eigen::VectorXd k3 = detail::footprint_mean(kappa, n, 3);
  Eigen::VectorXd k4 = detail::footprint_mean(kappa, n, 4);
  // corner rows of the dissipation blocks carry zero weight; the interior
  // identity (compact stencil) only needs rows >= 3 resp. >= 2
  for (int m = 0; m < 3; ++m) k3(m) = k3(n - 1 - m) = 0.0;
  for (int m = 0; m < 2; ++m) k4(m) = k4(n - 1 - m) = 0.0;
  const double dx5 = std::pow(dx, 5);
  const double dx7 = std::pow(dx, 7);
  return (dx5 / 18.0) * S3.transpose() * k3.asDiagonal() * S3 +
         (dx7 / 144.0) * S4.transpose() * k4.asDiagonal() * S4;
}

// Banded row storage for the matrix-free 1D operator applies.
struct BandedOp {
  int n = 0;
  std::vector<int> lo;      // first nonzero column per row
  std::vector<int> off;     // prefix offsets into coef
  std::vector<double> coef;

  static BandedOp from_dense(const Eigen::MatrixXd& A, double drop = 0.0) {
    BandedOp b;
    b.n = static_cast<int>(A.rows());
    b.lo.resize(b.n);
    b.off.resize(b.n + 1, 0);
    for (int r = 0; r < b.n; ++r) {
      int first = 0, last = b.n - 1;
      while (first < b.n && std::abs(A(r, first)) <= drop) ++first;
      while (last >= first && std::abs(A(r, last)) <= drop) --last;
      if (first > last) { first = r; last = r; }  // keep an explicit zero entry
      b.lo[r] = first;
      b.off[r + 1] = b.off[r] + (last - first + 1);
      for (int c = first; c <= last; ++c) b.coef.push_back(A(r, c));
    }
    return b;
  }

  // out = A u (contiguous vectors)
  void apply(std::span<const double> u, std::span<double> out) const {
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      const int w = off[r + 1] - off[r];
      const double* a = coef.data() + off[r];
      const double* v = u.data() + lo[r];
      for (int k = 0; k < w; ++k) s += a[k] * v[k];
      out[r] = s;
    }
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int r = 0; r < n; ++r)
      for (int k = off[r]; k < off[r + 1]; ++k) A(r, lo[r] + k - off[r]) = coef[k];
    return A;
  }

  // out += A u
  void apply_add(std::span<const double> u, std::span<double> out) const {
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      const int w = off[r + 1] - off[r];
      const double* a = coef.data() + off[r];
      const double* v = u.data() + lo[r];
      for (int k = 0; k < w; ++k) s += a[k] * v[k];
      out[r] += s;
    }
  }
};

// 1D SBP operator set: D1, variable-coefficient D2, diagonal norm, and the
// dense M/R factors used by the structural verification.
struct SbpOperatorSet {
  int order = 2;
  int n = 0;
  double dx = 1.0;
  std::vector<double> kappa;
  NormWeights norm;          // dimensionless h weights plus dx
  BandedOp d1;
  BandedOp d2;
  std::vector<double> d1_row_first;  // boundary derivative stencils (width below)
  std::vector<double> d1_row_last;
  int d1_bw = 0;

  // reconstructed from the banded storage so tests can inject faults
  Eigen::MatrixXd dense_d1() const { return d1.to_dense(); }
  Eigen::MatrixXd dense_r() const { return sbp_r_dense(order, n, dx, kappa); }

  Eigen::MatrixXd dense_m() const {
    Eigen::MatrixXd D1 = dense_d1();
    Eigen::VectorXd kh(n);
    for (int j = 0; j < n; ++j) kh(j) = kappa[j] * dx * norm.h[j];
    return D1.transpose() * kh.asDiagonal() * D1 + dense_r();
  }

  Eigen::MatrixXd dense_d2() const {
    Eigen::MatrixXd M = dense_m();
    Eigen::MatrixXd D1 = dense_d1();
    Eigen::MatrixXd BKD = Eigen::MatrixXd::Zero(n, n);
    BKD.row(0) = -kappa[0] * D1.row(0);
    BKD.row(n - 1) = kappa[n - 1] * D1.row(n - 1);
    Eigen::MatrixXd HD2 = -M + BKD;
    for (int r = 0; r < n; ++r) HD2.row(r) /= dx * norm.h[r];
    return HD2;
  }
};

inline SbpOperatorSet build_sbp(int order, int n, double dx, std::vector<double> kappa) {
  if (order != 2 && order != 4) throw std::invalid_argument("build_sbp: order must be 2 or 4");
  if (n < sbp_min_points(order))
    throw std::invalid_argument("build_sbp: n = " + std::to_string(n) +
                                " below the order-" + std::to_string(order) +
                                " closure minimum " + std::to_string(sbp_min_points(order)));
  if (!(dx > 0.0)) throw std::invalid_argument("build_sbp: dx must be positive");
  if (static_cast<int>(kappa.size()) != n)
    throw std::invalid_argument("build_sbp: kappa length mismatch");
  for (double k : kappa)
    if (!(k > 0.0)) throw std::invalid_argument("build_sbp: kappa must be strictly positive");

  SbpOperatorSet s;
  s.order = order;
  s.n = n;
  s.dx = dx;
  s.kappa = std::move(kappa);
  s.norm = NormWeights{sbp_norm_weights(order, n), dx};
  Eigen::MatrixXd D1 = sbp_d1_dense(order, n, dx);
  s.d1 = BandedOp::from_dense(D1);
  s.d2 = BandedOp::from_dense(s.dense_d2(), 1e-300);
  s.d1_bw = (order == 2) ? 2 : 6;
  s.d1_row_first.resize(s.d1_bw);
  s.d1_row_last.resize(s.d1_bw);
  for (int k = 0; k < s.d1_bw; ++k) {
    s.d1_row_first[k] = D1(0, k);
    s.d1_row_last[k] = D1(n - 1, n - s.d1_bw + k);
  }
  return s;
}

struct SbpIdentityReport {
  double q_defect = 0.0;      // max |Q + Q^T - B|
  double m_symmetry = 0.0;    // max |M - M^T|
  double r_symmetry = 0.0;
  double m_min_eig = 0.0;
  double r_min_eig = 0.0;
  double d2_identity = 0.0;   // max |H D2 - (-M + B K D1)|

  bool pass(double tol) const {
    return q_defect <= tol && m_symmetry <= tol && r_symmetry <= tol &&
           m_min_eig >= -tol && r_min_eig >= -tol && d2_identity <= tol;
  }
};

inline SbpIdentityReport verify_sbp_identities(const SbpOperatorSet& ops, double /*tol*/ = 0.0) {
  const int n = ops.n;
  Eigen::MatrixXd D1 = ops.dense_d1();
  Eigen::VectorXd H(n);
  for (int j = 0; j < n; ++j) H(j) = ops.dx * ops.norm.h[j];
  Eigen::MatrixXd Q = H.asDiagonal() * D1;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  B(0, 0) = -1.0;
  B(n - 1, n - 1) = 1.0;

  SbpIdentityReport rep;
  rep.q_defect = (Q + Q.transpose() - B).cwiseAbs().maxCoeff();
  Eigen::MatrixXd M = ops.dense_m();
  Eigen::MatrixXd R = ops.dense_r();
  rep.m_symmetry = (M - M.transpose()).cwiseAbs().maxCoeff();
  rep.r_symmetry = (R - R.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (M + M.transpose()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(0.5 * (R + R.transpose()));
  rep.m_min_eig = em.eigenvalues().minCoeff();
  rep.r_min_eig = er.eigenvalues().minCoeff();

  Eigen::MatrixXd D2 = ops.dense_d2();
  Eigen::MatrixXd BKD = Eigen::MatrixXd::Zero(n, n);
  BKD.row(0) = -ops.kappa[0] * D1.row(0);
  BKD.row(n - 1) = ops.kappa[n - 1] * D1.row(n - 1);
  rep.d2_identity = (H.asDiagonal() * D2 - (-M + BKD)).cwiseAbs().maxCoeff();
  return rep;
}

// --- 2D Kronecker extensions -------------------------------------------------

// Matrix-free actions of the 1D operators over the flattened layout of Grid2D.
struct Sbp2D {
  const Grid2D* grid = nullptr;
  SbpOperatorSet x;
  SbpOperatorSet y;

  // out = (Ax (x) Iy) u, Ax banded
  static void apply_x(const BandedOp& A, const Grid2D& g, std::span<const double> u,
                      std::span<double> out) {
    const int ny = g.ny();
    for (int r = 0; r < A.n; ++r) {
      double* orow = out.data() + r * ny;
      std::fill(orow, orow + ny, 0.0);
      const int w = A.off[r + 1] - A.off[r];
      for (int k = 0; k < w; ++k) {
        const double a = A.coef[A.off[r] + k];
        const double* urow = u.data() + (A.lo[r] + k) * ny;
        for (int j = 0; j < ny; ++j) orow[j] += a * urow[j];
      }
    }
  }

  // out = (Ix (x) Ay) u
  static void apply_y(const BandedOp& A, const Grid2D& g, std::span<const double> u,
                      std::span<double> out) {
    const int nx = g.nx();
    const int ny = g.ny();
    for (int i = 0; i < nx; ++i)
      A.apply(u.subspan(i * ny, ny), out.subspan(i * ny, ny));
  }

  // out += (Ix (x) Ay) u
  static void apply_y_add(const BandedOp& A, const Grid2D& g, std::span<const double> u,
                          std::span<double> out) {
    const int nx = g.nx();
    const int ny = g.ny();
    for (int i = 0; i < nx; ++i)
      A.apply_add(u.subspan(i * ny, ny), out.subspan(i * ny, ny));
  }

  void dxx(std::span<const double> u, std::span<double> out) const { apply_x(x.d2, *grid, u, out); }
  void dyy(std::span<const double> u, std::span<double> out) const { apply_y(y.d2, *grid, u, out); }
  void dyy_add(std::span<const double> u, std::span<double> out) const {
    apply_y_add(y.d2, *grid, u, out);
  }
  void dx(std::span<const double> u, std::span<double> out) const { apply_x(x.d1, *grid, u, out); }
  void dy(std::span<const double> u, std::span<double> out) const { apply_y(y.d1, *grid, u, out); }

  // diagonal of H = Hx (x) Hy
  std::vector<double> h_diag() const {
    std::vector<double> d(grid->size());
    for (int i = 0; i < grid->nx(); ++i)
      for (int j = 0; j < grid->ny(); ++j)
        d[i * grid->ny() + j] = (x.dx * x.norm.h[i]) * (y.dx * y.norm.h[j]);
    return d;
  }
};

inline Sbp2D extend_2d(SbpOperatorSet ops_x, SbpOperatorSet ops_y, const Grid2D& grid) {
  if (ops_x.n != grid.nx() || ops_y.n != grid.ny())
    throw std::invalid_argument("extend_2d: operator sizes do not match grid");
  Sbp2D s;
  s.grid = &grid;
  s.x = std::move(ops_x);
  s.y = std::move(ops_y);
  return s;
}

// --- boundary projection operators -------------------------------------------

// 1D selector actions. E_first v = (v_0 - v_{n-1})e_0, E_last v = (v_{n-1} - v_0)e_{n-1}.
inline std::vector<double> project_first(std::span<const double> v) {
  std::vector<double> r(v.size(), 0.0);
  r.front() = v.front();
  return r;
}
inline std::vector<double> project_last(std::span<const double> v) {
  std::vector<double> r(v.size(), 0.0);
  r.back() = v.back();
  return r;
}
inline std::vector<double> periodic_diff_first(std::span<const double> v) {
  std::vector<double> r(v.size(), 0.0);
  r.front() = v.front() - v.back();
  return r;
}
inline std::vector<double> periodic_diff_last(std::span<const double> v) {
  std::vector<double> r(v.size(), 0.0);
  r.back() = v.back() - v.front();
  return r;
}

// 2D extensions acting on the flattened layout.
struct BoundaryProjections {
  const Grid2D* grid = nullptr;

  void b_first_x(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int ny = grid->ny();
    for (int j = 0; j < ny; ++j) out[j] = u[j];
  }
  void b_last_x(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int ny = grid->ny(), nx = grid->nx();
    for (int j = 0; j < ny; ++j) out[(nx - 1) * ny + j] = u[(nx - 1) * ny + j];
  }
  void e_first_y(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int ny = grid->ny();
    for (int i = 0; i < grid->nx(); ++i)
      out[i * ny] = u[i * ny] - u[i * ny + ny - 1];
  }
  void e_last_y(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int ny = grid->ny();
    for (int i = 0; i < grid->nx(); ++i)
      out[i * ny + ny - 1] = u[i * ny + ny - 1] - u[i * ny];
  }
};

inline BoundaryProjections build_boundary_projections(const Grid2D& grid) {
  return BoundaryProjections{&grid};
}

}  // namespace anisodiff

#endif  // ANISODIFF_SBP_HPP_
