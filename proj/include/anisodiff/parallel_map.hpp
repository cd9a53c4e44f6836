#ifndef ANISODIFF_PARALLEL_MAP_HPP_
#define ANISODIFF_PARALLEL_MAP_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisodiff/grid.hpp"

namespace anisodiff {

enum class MapDirection { Forward, Backward };

// Landing stencil for one grid node: corner indices of the containing cell and
// bilinear weights. Weights are nonnegative and sum to 1; degenerate landings
// (on a node or edge) keep zero weights on the unused corners.
struct LandingStencil {
  int idx[4] = {0, 0, 0, 0};
  double w[4] = {1.0, 0.0, 0.0, 0.0};
};

// Forward/backward landing records for every grid node. The permutation and
// interpolation factors of the projection operators are fused into one stencil
// per node; the matrices are never materialized except for test oracles.
struct ParallelMap {
  int nx = 0;
  int ny = 0;
  std::vector<LandingStencil> forward;
  std::vector<LandingStencil> backward;

  static ParallelMap identity(const Grid2D& grid) {
    ParallelMap m;
    m.nx = grid.nx();
    m.ny = grid.ny();
    m.forward.resize(grid.size());
    m.backward.resize(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
      m.forward[k].idx[0] = k;
      m.backward[k].idx[0] = k;
    }
    return m;
  }

  const std::vector<LandingStencil>& stencils(MapDirection d) const {
    return d == MapDirection::Forward ? forward : backward;
  }

  Eigen::MatrixXd dense(MapDirection d) const {
    const auto& st = stencils(d);
    const int N = nx * ny;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    for (int k = 0; k < N; ++k)
      for (int c = 0; c < 4; ++c) P(k, st[k].idx[c]) += st[k].w[c];
    return P;
  }
};

// Bilinear stencil for a landing point (x, y). Periodic wrap in y when asked;
// in x the point must lie inside the domain up to snap_tol (the caller treats
// anything beyond as a lost field line). Seam landings in the periodic
// direction pick the representative grid line closer to y_source, so
// grid-aligned fields reproduce the identity map exactly.
inline LandingStencil make_landing_stencil(const Grid2D& grid, double x, double y,
                                           bool periodic_y, double y_source,
                                           double snap_tol) {
  const Grid1D& gx = grid.gx;
  const Grid1D& gy = grid.gy;
  const double Lx = gx.length();
  const double Ly = gy.length();

  if (x < gx.x_left || x > gx.x_right) {
    if (x >= gx.x_left - snap_tol * Lx && x <= gx.x_right + snap_tol * Lx)
      x = std::clamp(x, gx.x_left, gx.x_right);
    else
      throw std::domain_error("landing point left the domain in x: x = " + std::to_string(x));
  }
  if (periodic_y) {
    double t = std::fmod(y - gy.x_left, Ly);
    if (t < 0.0) t += Ly;
    y = gy.x_left + t;
    if (t < snap_tol * Ly || Ly - t < snap_tol * Ly) {
      // landing on the seam: both edges represent the same physical line
      y = (std::abs(y_source - gy.x_right) < std::abs(y_source - gy.x_left)) ? gy.x_right
                                                                             : gy.x_left;
    }
  } else {
    if (y < gy.x_left || y > gy.x_right) {
      if (y >= gy.x_left - snap_tol * Ly && y <= gy.x_right + snap_tol * Ly)
        y = std::clamp(y, gy.x_left, gy.x_right);
      else
        throw std::domain_error("landing point left the domain in y: y = " + std::to_string(y));
    }
  }

  int ci = static_cast<int>((x - gx.x_left) / gx.dx);
  int cj = static_cast<int>((y - gy.x_left) / gy.dx);
  ci = std::clamp(ci, 0, gx.n - 2);
  cj = std::clamp(cj, 0, gy.n - 2);
  double fx = (x - gx.point(ci)) / gx.dx;
  double fy = (y - gy.point(cj)) / gy.dx;
  fx = std::clamp(fx, 0.0, 1.0);
  fy = std::clamp(fy, 0.0, 1.0);

  LandingStencil s;
  s.idx[0] = grid.flat(ci, cj);
  s.idx[1] = grid.flat(ci, cj + 1);
  s.idx[2] = grid.flat(ci + 1, cj);
  s.idx[3] = grid.flat(ci + 1, cj + 1);
  s.w[0] = (1.0 - fx) * (1.0 - fy);
  s.w[1] = (1.0 - fx) * fy;
  s.w[2] = fx * (1.0 - fy);
  s.w[3] = fx * fy;
  return s;
}

inline void apply_map(const ParallelMap& map, MapDirection dir, std::span<const double> u,
                      std::span<double> out) {
  const auto& st = map.stencils(dir);
  const int N = map.nx * map.ny;
  if (static_cast<int>(u.size()) != N || static_cast<int>(out.size()) != N)
    throw std::invalid_argument("apply_map: length mismatch");
  for (int k = 0; k < N; ++k) {
    const LandingStencil& s = st[k];
    out[k] = s.w[0] * u[s.idx[0]] + s.w[1] * u[s.idx[1]] + s.w[2] * u[s.idx[2]] +
             s.w[3] * u[s.idx[3]];
  }
}

// tau_par = Lx*Ly/sqrt(dx*dy); grows unboundedly under refinement, forcing
// u -> (w_f + w_b)/2 in the parallel limit.
inline double default_tau_par(const Grid2D& grid) {
  return grid.gx.length() * grid.gy.length() / std::sqrt(grid.gx.dx * grid.gy.dx);
}

struct ParallelPenalty {
  double tau_par = 1.0;
  double kappa_par = 1.0;
};

// P_par u = -tau*kappa*(u - (P_f u + P_b u)/2)
inline void apply_parallel_operator(const ParallelMap& map, const ParallelPenalty& pen,
                                    std::span<const double> u, std::span<double> out) {
  const int N = map.nx * map.ny;
  std::vector<double> wf(N), wb(N);
  apply_map(map, MapDirection::Forward, u, wf);
  apply_map(map, MapDirection::Backward, u, wb);
  for (int k = 0; k < N; ++k)
    out[k] = -pen.tau_par * pen.kappa_par * (u[k] - 0.5 * (wf[k] + wb[k]));
}

// Closed-form stage-2 update: a pointwise solve, no linear system.
// u_next = (1 + dt*tau*kappa)^{-1} (u_half + dt*tau*kappa/2 (w_b + w_f))
inline std::vector<double> parallel_update(std::span<const double> u_half,
                                           const ParallelMap& map, const ParallelPenalty& pen,
                                           double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("parallel_update: dt must be positive");
  const int N = map.nx * map.ny;
  std::vector<double> wf(N), wb(N);
  apply_map(map, MapDirection::Forward, u_half, wf);
  apply_map(map, MapDirection::Backward, u_half, wb);
  const double g = dt * pen.tau_par * pen.kappa_par;
  const double inv = 1.0 / (1.0 + g);
  std::vector<double> out(N);
  for (int k = 0; k < N; ++k) out[k] = inv * (u_half[k] + 0.5 * g * (wf[k] + wb[k]));
  return out;
}

struct OperatorNormReport {
  double norm_forward = 0.0;
  double norm_backward = 0.0;
  double min_weight = 0.0;        // most negative stencil weight
  double max_weight_defect = 0.0; // max |sum w - 1| per node
  double max_column_sum = 0.0;    // worst gather clustering, diagnostic
  bool weights_ok(double tol = 1e-12) const {
    return min_weight >= -tol && max_weight_defect <= tol;
  }
};

// Estimates ||P||_l2 by power iteration on P^T P and audits the stencil
// weights. The weight audit comes first: a violated convex-combination
// invariant explains a norm above one before the norm itself does.
inline OperatorNormReport operator_norm_check(const ParallelMap& map, int iterations = 200) {
  OperatorNormReport rep;
  rep.min_weight = 1.0;
  const int N = map.nx * map.ny;
  std::vector<double> colsum(N, 0.0);
  for (const auto* side : {&map.forward, &map.backward}) {
    for (const auto& s : *side) {
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) {
        rep.min_weight = std::min(rep.min_weight, s.w[c]);
        sum += s.w[c];
      }
      rep.max_weight_defect = std::max(rep.max_weight_defect, std::abs(sum - 1.0));
    }
  }
  for (const auto& s : map.forward)
    for (int c = 0; c < 4; ++c) colsum[s.idx[c]] += s.w[c];
  for (double c : colsum) rep.max_column_sum = std::max(rep.max_column_sum, c);

  auto power_norm = [&](MapDirection d) {
    std::vector<double> v(N), pv(N), w(N, 0.0);
    // deterministic pseudo-random start
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    for (int k = 0; k < N; ++k) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      v[k] = (static_cast<double>(state >> 11) / 9007199254740992.0) - 0.5;
    }
    double lam = 0.0;
    const auto& st = map.stencils(d);
    for (int it = 0; it < iterations; ++it) {
      apply_map(map, d, v, pv);
      std::fill(w.begin(), w.end(), 0.0);
      for (int k = 0; k < N; ++k)
        for (int c = 0; c < 4; ++c) w[st[k].idx[c]] += st[k].w[c] * pv[k];  // P^T (P v)
      double nrm = 0.0;
      for (double val : w) nrm += val * val;
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) return 0.0;
      lam = nrm;
      for (int k = 0; k < N; ++k) v[k] = w[k] / nrm;
    }
    return std::sqrt(lam);
  };
  rep.norm_forward = power_norm(MapDirection::Forward);
  rep.norm_backward = power_norm(MapDirection::Backward);
  return rep;
}

}  // namespace anisodiff

#endif  // ANISODIFF_PARALLEL_MAP_HPP_
