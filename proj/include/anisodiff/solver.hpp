#ifndef ANISODIFF_SOLVER_HPP_
#define ANISODIFF_SOLVER_HPP_

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisodiff/grid.hpp"
#include "anisodiff/parallel_map.hpp"
#include "anisodiff/perp.hpp"

namespace anisodiff {

struct CgStats {
  int iterations = 0;
  double residual = 0.0;  // ||r||_H at exit
  bool converged = true;
};

// Conjugate gradient in the inner product <u,v> = u^T H v for an operator that
// is self-adjoint positive definite in it (here I - dt*P_perp with stable
// penalties). Stopping rule compares the H-norm residual against the H-norm of
// the current iterate.
inline CgStats cg_solve_hnorm(const std::function<void(std::span<const double>, std::span<double>)>& apply_A,
                              std::span<const double> b, std::span<double> x,
                              std::span<const double> h_diag, double rtol = 1e-10,
                              int maxit = 0) {
  const int n = static_cast<int>(b.size());
  if (maxit <= 0) maxit = 10 * n;
  if (!(rtol > 0.0)) throw std::invalid_argument("cg_solve_hnorm: rtol must be positive");

  auto hdot = [&](std::span<const double> a, std::span<const double> c) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += a[k] * h_diag[k] * c[k];
    return s;
  };

  std::vector<double> r(n), d(n), q(n);
  apply_A(x, r);
  for (int k = 0; k < n; ++k) r[k] = b[k] - r[k];
  d.assign(r.begin(), r.end());
  double rho = hdot(r, r);

  CgStats st;
  for (;;) {
    const double xnorm = std::sqrt(hdot(x, x));
    const double rnorm = std::sqrt(rho);
    st.residual = rnorm;
    if (!std::isfinite(rnorm) || !std::isfinite(xnorm))
      throw std::runtime_error("cg_solve_hnorm: non-finite values encountered");
    if (rnorm <= rtol * std::max(xnorm, 1e-300) || rnorm == 0.0) return st;
    if (st.iterations >= maxit) {
      st.converged = false;
      return st;
    }
    apply_A(d, q);
    const double dAd = hdot(d, q);
    const double alpha = rho / dAd;
    for (int k = 0; k < n; ++k) {
      x[k] += alpha * d[k];
      r[k] -= alpha * q[k];
    }
    const double rho_new = hdot(r, r);
    const double beta = rho_new / rho;
    for (int k = 0; k < n; ++k) d[k] = r[k] + beta * d[k];
    rho = rho_new;
    ++st.iterations;
  }
}

using SourceFn = std::function<double(double x, double y, double t)>;
using FieldFn = std::function<double(double x, double y)>;

// Full problem description for the split stepper. kappa_perp = 0 selects the
// asymptotic limit: stage 1 degenerates to u + dt*F and no perpendicular
// operator is built. Without a parallel map the problem is purely
// perpendicular.
struct Problem {
  const Grid2D* grid = nullptr;
  double kappa_perp = 1.0;
  std::optional<PerpOperator> perp;
  const ParallelMap* map = nullptr;
  ParallelPenalty penalty;
  SourceFn source;   // optional
  FieldFn initial;   // optional, defaults to zero
  double cg_rtol = 1e-10;
  int cg_maxit = 0;  // 0: 10*N
};

struct StepDiagnostics {
  double t = 0.0;
  double h_norm = 0.0;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

struct SolverState {
  std::vector<double> u;
  double t = 0.0;
  int step = 0;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<double> h_diag_cache;  // filled on first use
};

inline std::vector<double> h_diag_of(const Problem& p) {
  if (p.perp) return p.perp->h_diag();
  // kappa_perp = 0: fall back to the order-2 quadrature for diagnostics
  std::vector<double> hx = sbp_norm_weights(2, p.grid->nx());
  std::vector<double> hy = sbp_norm_weights(2, p.grid->ny());
  std::vector<double> d(p.grid->size());
  for (int i = 0; i < p.grid->nx(); ++i)
    for (int j = 0; j < p.grid->ny(); ++j)
      d[i * p.grid->ny() + j] = (p.grid->gx.dx * hx[i]) * (p.grid->gy.dx * hy[j]);
  return d;
}

inline SolverState init_state(const Problem& p) {
  SolverState s;
  s.u.assign(p.grid->size(), 0.0);
  if (p.initial) {
    for (int i = 0; i < p.grid->nx(); ++i)
      for (int j = 0; j < p.grid->ny(); ++j)
        s.u[i * p.grid->ny() + j] = p.initial(p.grid->x(i), p.grid->y(j));
  }
  return s;
}

inline std::vector<double> sample_source(const Problem& p, double t) {
  std::vector<double> f(p.grid->size(), 0.0);
  if (p.source) {
    for (int i = 0; i < p.grid->nx(); ++i)
      for (int j = 0; j < p.grid->ny(); ++j)
        f[i * p.grid->ny() + j] = p.source(p.grid->x(i), p.grid->y(j), t);
  }
  return f;
}

// One split step: implicit perpendicular stage (CG in the H-norm) followed by
// the pointwise parallel update. Source and boundary data are evaluated at
// t + dt.
inline void step(const Problem& p, SolverState& state, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const int N = p.grid->size();
  const double tn = state.t + dt;

  std::vector<double> b = sample_source(p, tn);
  std::vector<double> u_half(state.u);
  CgStats cg;
  if (p.perp) {
    std::vector<double> sg = p.perp->data_term(tn);
    for (int k = 0; k < N; ++k) b[k] = state.u[k] + dt * (b[k] + sg[k]);
    if (state.h_diag_cache.empty()) state.h_diag_cache = h_diag_of(p);
    auto apply_A = [&](std::span<const double> v, std::span<double> out) {
      p.perp->apply_homogeneous(v, out);
      for (int k = 0; k < N; ++k) out[k] = v[k] - dt * out[k];
    };
    cg = cg_solve_hnorm(apply_A, b, u_half, state.h_diag_cache, p.cg_rtol, p.cg_maxit);
    if (!cg.converged)
      throw std::runtime_error("step: CG failed to converge at t = " + std::to_string(tn) +
                               " (residual " + std::to_string(cg.residual) + ")");
  } else {
    for (int k = 0; k < N; ++k) u_half[k] = state.u[k] + dt * b[k];
  }

  if (p.map != nullptr) {
    state.u = parallel_update(u_half, *p.map, p.penalty, dt);
  } else {
    state.u = std::move(u_half);
  }
  state.t = tn;
  ++state.step;

  StepDiagnostics d;
  d.t = tn;
  d.cg_iterations = cg.iterations;
  d.cg_residual = cg.residual;
  if (state.h_diag_cache.empty()) state.h_diag_cache = h_diag_of(p);
  double nn = 0.0;
  for (int k = 0; k < N; ++k) nn += state.u[k] * state.h_diag_cache[k] * state.u[k];
  d.h_norm = std::sqrt(nn);
  state.diagnostics.push_back(d);
}

struct RunOptions {
  bool record_history = false;    // store full snapshots
  int history_stride = 1;
};

struct RunResult {
  SolverState state;
  std::vector<std::vector<double>> history;  // optional snapshots
  std::vector<double> history_times;
};

// Repeated stepping to t_final; the last step is shortened to land exactly.
inline RunResult run(const Problem& p, double dt, double t_final, RunOptions opts = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("run: dt must be positive");
  if (t_final < 0.0) throw std::invalid_argument("run: t_final must be nonnegative");
  RunResult rr;
  rr.state = init_state(p);
  {
    rr.state.h_diag_cache = h_diag_of(p);
    double nn = 0.0;
    for (int k = 0; k < p.grid->size(); ++k)
      nn += rr.state.u[k] * rr.state.h_diag_cache[k] * rr.state.u[k];
    StepDiagnostics d0;
    d0.t = 0.0;
    d0.h_norm = std::sqrt(nn);
    rr.state.diagnostics.push_back(d0);
  }
  if (opts.record_history) {
    rr.history.push_back(rr.state.u);
    rr.history_times.push_back(0.0);
  }
  while (rr.state.t < t_final - 1e-14 * std::max(1.0, t_final)) {
    const double h = std::min(dt, t_final - rr.state.t);
    step(p, rr.state, h);
    if (opts.record_history && (rr.state.step % opts.history_stride == 0)) {
      rr.history.push_back(rr.state.u);
      rr.history_times.push_back(rr.state.t);
    }
  }
  return rr;
}

struct EnergyAuditReport {
  bool pass = true;
  int first_violation_step = -1;
  double worst_relative_increase = 0.0;
};

// Guarded variant: the audit only speaks to homogeneous problems.
inline EnergyAuditReport energy_audit(const std::vector<StepDiagnostics>& diag,
                                      double rel_tol = 1e-12);

inline EnergyAuditReport energy_audit_homogeneous(const Problem& p,
                                                  const std::vector<StepDiagnostics>& diag,
                                                  double rel_tol = 1e-12) {
  if (p.source)
    throw std::invalid_argument("energy_audit: run has a source term; the estimate applies to "
                                "homogeneous data only");
  if (p.perp && (p.perp->g_left || p.perp->g_right || p.perp->g_bottom || p.perp->g_top))
    throw std::invalid_argument("energy_audit: run has boundary data; the estimate applies to "
                                "homogeneous data only");
  return energy_audit(diag, rel_tol);
}

// Verifies the per-step H-norm sequence never increases (homogeneous runs).
inline EnergyAuditReport energy_audit(const std::vector<StepDiagnostics>& diag,
                                      double rel_tol) {
  EnergyAuditReport rep;
  for (std::size_t k = 1; k < diag.size(); ++k) {
    const double prev = diag[k - 1].h_norm;
    const double inc = (diag[k].h_norm - prev) / std::max(prev, 1e-300);
    rep.worst_relative_increase = std::max(rep.worst_relative_increase, inc);
    if (inc > rel_tol && rep.first_violation_step < 0) {
      rep.pass = false;
      rep.first_violation_step = static_cast<int>(k);
    }
  }
  return rep;
}

}  // namespace anisodiff

#endif  // ANISODIFF_SOLVER_HPP_
