#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "anisodiff/sbp.hpp"
#include "test_helpers.hpp"

using namespace anisodiff;

namespace {
std::vector<double> const_kappa(int n, double v = 1.0) { return std::vector<double>(n, v); }

std::vector<double> var_kappa(int n) {
  std::vector<double> k(n);
  for (int j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / (n - 1);
    k[j] = 1.0 + x * x;
  }
  return k;
}
}  // namespace

TEST_CASE("D1 is exact on linears at every point") {
  for (int order : {2, 4}) {
    const int n = 20;
    const double dx = 1.0 / (n - 1);
    SbpOperatorSet s = build_sbp(order, n, dx, const_kappa(n));
    std::vector<double> u(n), out(n);
    for (int j = 0; j < n; ++j) u[j] = j * dx;
    s.d1.apply(u, out);
    for (int j = 0; j < n; ++j) CHECK(out[j] == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("D1 polynomial exactness by order: interior and boundary") {
  for (int order : {2, 4}) {
    const int n = 24;
    const double dx = 1.0 / (n - 1);
    SbpOperatorSet s = build_sbp(order, n, dx, const_kappa(n));
    const int bw = order == 2 ? 1 : 4;
    for (int p = 0; p <= order; ++p) {
      std::vector<double> u(n), out(n);
      for (int j = 0; j < n; ++j) u[j] = std::pow(j * dx, p);
      s.d1.apply(u, out);
      for (int j = 0; j < n; ++j) {
        const double exact = p == 0 ? 0.0 : p * std::pow(j * dx, p - 1);
        const bool boundary = j < bw || j >= n - bw;
        if (!boundary || p <= order / 2)
          CHECK(out[j] == Catch::Approx(exact).margin(1e-10));
      }
    }
  }
}

TEST_CASE("order-2 D2 with constant kappa reproduces quadratics in the interior") {
  const int n = 16;
  const double dx = 1.0 / (n - 1);
  SbpOperatorSet s = build_sbp(2, n, dx, const_kappa(n));
  std::vector<double> u(n), out(n);
  for (int j = 0; j < n; ++j) u[j] = (j * dx) * (j * dx);
  s.d2.apply(u, out);
  // the fully compatible order-2 closure annihilates the first and last rows
  CHECK(out.front() == Catch::Approx(0.0).margin(1e-11));
  CHECK(out.back() == Catch::Approx(0.0).margin(1e-11));
  for (int j = 1; j < n - 1; ++j) CHECK(out[j] == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("order-4 D2 with constant kappa reproduces quadratics everywhere") {
  const int n = 16;
  const double dx = 1.0 / (n - 1);
  SbpOperatorSet s = build_sbp(4, n, dx, const_kappa(n));
  std::vector<double> u(n), out(n);
  for (int j = 0; j < n; ++j) u[j] = (j * dx) * (j * dx);
  s.d2.apply(u, out);
  for (int j = 0; j < n; ++j) CHECK(out[j] == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("Q + Q^T equals the boundary matrix exactly (order 2, n = 5)") {
  const int n = 5;
  SbpOperatorSet s = build_sbp(2, n, 0.25, const_kappa(n));
  Eigen::MatrixXd D1 = s.dense_d1();
  Eigen::VectorXd H(n);
  for (int j = 0; j < n; ++j) H(j) = 0.25 * s.norm.h[j];
  Eigen::MatrixXd QQt = H.asDiagonal() * D1 + (H.asDiagonal() * D1).transpose();
  int nonzero = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (std::abs(QQt(r, c)) > 1e-14) ++nonzero;
  CHECK(nonzero == 2);
  CHECK(QQt(0, 0) == Catch::Approx(-1.0));
  CHECK(QQt(n - 1, n - 1) == Catch::Approx(1.0));
}

TEST_CASE("structural identities hold for both orders, constant and variable kappa") {
  for (int order : {2, 4}) {
    for (int n : {order == 2 ? 8 : 12, 16, 24}) {
      for (bool variable : {false, true}) {
        const double dx = 1.0 / (n - 1);
        SbpOperatorSet s =
            build_sbp(order, n, dx, variable ? var_kappa(n) : const_kappa(n));
        SbpIdentityReport rep = verify_sbp_identities(s);
        INFO("order " << order << " n " << n << " variable " << variable);
        CHECK(rep.q_defect <= 1e-12);
        CHECK(rep.m_symmetry <= 1e-12);
        CHECK(rep.r_symmetry <= 1e-12);
        CHECK(rep.m_min_eig >= -1e-12);
        CHECK(rep.r_min_eig >= -1e-12);
        CHECK(rep.d2_identity <= 1e-10);
        CHECK(rep.pass(1e-10));
      }
    }
  }
}

TEST_CASE("corrupted first-derivative operator is flagged by the identity check") {
  SbpOperatorSet s = build_sbp(2, 8, 1.0 / 7, const_kappa(8));
  s.d1.coef[0] += 0.3;  // breaks Q + Q^T = B at the (0,0) corner
  SbpIdentityReport rep = verify_sbp_identities(s);
  CHECK(rep.q_defect > 1e-3);
  CHECK_FALSE(rep.pass(1e-10));
}

TEST_CASE("build_sbp rejects invalid input") {
  CHECK_THROWS_AS(build_sbp(3, 16, 0.1, const_kappa(16)), std::invalid_argument);
  CHECK_THROWS_AS(build_sbp(2, 3, 0.1, const_kappa(3)), std::invalid_argument);
  CHECK_THROWS_AS(build_sbp(4, 11, 0.1, const_kappa(11)), std::invalid_argument);
  CHECK_THROWS_AS(build_sbp(2, 8, 0.1, const_kappa(8, -1.0)), std::invalid_argument);
  CHECK_THROWS_AS(build_sbp(2, 8, 0.1, const_kappa(8, 0.0)), std::invalid_argument);
}

TEST_CASE("2D extensions act like the dense Kronecker matrices") {
  Grid2D g = make_grid_2d(0.0, 1.0, 8, 0.0, 2.0, 8);
  SbpOperatorSet sx = build_sbp(2, 8, g.gx.dx, const_kappa(8));
  SbpOperatorSet sy = build_sbp(2, 8, g.gy.dx, const_kappa(8));
  Eigen::MatrixXd D1x = sx.dense_d1(), D2y = sy.dense_d2();
  Sbp2D ops = extend_2d(std::move(sx), std::move(sy), g);

  Eigen::MatrixXd I8 = Eigen::MatrixXd::Identity(8, 8);
  Eigen::MatrixXd Dx2d = kron(D1x, I8);
  Eigen::MatrixXd Dyy2d = kron(I8, D2y);

  std::vector<double> u = random_vector(g.size(), 99);
  Eigen::VectorXd uv = Eigen::Map<const Eigen::VectorXd>(u.data(), g.size());

  std::vector<double> out(g.size());
  ops.dx(u, out);
  Eigen::VectorXd expect = Dx2d * uv;
  for (int k = 0; k < g.size(); ++k)
    CHECK(out[k] == Catch::Approx(expect(k)).margin(1e-12 * expect.cwiseAbs().maxCoeff()));

  ops.dyy(u, out);
  expect = Dyy2d * uv;
  for (int k = 0; k < g.size(); ++k)
    CHECK(out[k] == Catch::Approx(expect(k)).margin(1e-12 * expect.cwiseAbs().maxCoeff()));
}

TEST_CASE("2D derivative actions: exactness and commutation") {
  Grid2D g = make_grid_2d(0.0, 1.0, 12, 0.0, 1.0, 12);
  Sbp2D ops = extend_2d(build_sbp(2, 12, g.gx.dx, const_kappa(12)),
                        build_sbp(2, 12, g.gy.dx, const_kappa(12)), g);

  std::vector<double> u(g.size()), out(g.size());
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) u[g.flat(i, j)] = g.x(i);
  ops.dx(u, out);
  for (double v : out) CHECK(v == Catch::Approx(1.0).margin(1e-12));

  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) u[g.flat(i, j)] = g.y(j) * g.y(j);
  ops.dyy(u, out);
  for (int i = 0; i < 12; ++i)
    for (int j = 1; j < 11; ++j) CHECK(out[g.flat(i, j)] == Catch::Approx(2.0).margin(1e-9));

  // cross-direction factors commute
  u = random_vector(g.size(), 5);
  std::vector<double> a(g.size()), b(g.size()), ab(g.size()), ba(g.size());
  ops.dx(u, a);
  ops.dy(a, ab);
  ops.dy(u, b);
  ops.dx(b, ba);
  for (int k = 0; k < g.size(); ++k) CHECK(ab[k] == Catch::Approx(ba[k]).margin(1e-10));
}

TEST_CASE("extend_2d rejects size mismatch") {
  Grid2D g = make_grid_2d(0.0, 1.0, 8, 0.0, 1.0, 10);
  CHECK_THROWS_AS(extend_2d(build_sbp(2, 8, g.gx.dx, const_kappa(8)),
                            build_sbp(2, 8, g.gy.dx, const_kappa(8)), g),
                  std::invalid_argument);
}

TEST_CASE("boundary projection selectors match the displayed formulas") {
  std::vector<double> v = {3.0, 0.0, 0.0, 5.0};
  auto e1 = periodic_diff_first(v);
  CHECK(e1 == std::vector<double>{-2.0, 0.0, 0.0, 0.0});
  auto en = periodic_diff_last(v);
  CHECK(en == std::vector<double>{0.0, 0.0, 0.0, 2.0});

  auto first = project_first(v);
  auto then_last = project_last(first);
  for (double x : then_last) CHECK(x == 0.0);

  Grid2D g = make_grid_2d(0.0, 1.0, 4, 0.0, 1.0, 4);
  BoundaryProjections bp = build_boundary_projections(g);
  std::vector<double> u = random_vector(g.size(), 1);
  std::vector<double> out(g.size());
  bp.e_first_y(u, out);
  for (int i = 0; i < 4; ++i) {
    CHECK(out[g.flat(i, 0)] == u[g.flat(i, 0)] - u[g.flat(i, 3)]);
    CHECK(out[g.flat(i, 1)] == 0.0);
  }
  bp.b_first_x(u, out);
  std::vector<double> out2(g.size());
  bp.b_last_x(out, out2);
  for (double x : out2) CHECK(x == 0.0);
}

TEST_CASE("dense D2 assembly agrees with the banded apply") {
  for (int order : {2, 4}) {
    const int n = order == 2 ? 9 : 14;
    const double dx = 0.7 / (n - 1);
    SbpOperatorSet s = build_sbp(order, n, dx, var_kappa(n));
    Eigen::MatrixXd D2 = s.dense_d2();
    std::vector<double> u = random_vector(n, 42), out(n);
    s.d2.apply(u, out);
    Eigen::VectorXd uv = Eigen::Map<const Eigen::VectorXd>(u.data(), n);
    Eigen::VectorXd expect = D2 * uv;
    for (int j = 0; j < n; ++j)
      CHECK(out[j] == Catch::Approx(expect(j)).margin(1e-11 * expect.cwiseAbs().maxCoeff()));
  }
}
