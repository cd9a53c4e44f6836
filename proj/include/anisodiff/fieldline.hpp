#ifndef ANISODIFF_FIELDLINE_HPP_
#define ANISODIFF_FIELDLINE_HPP_

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "anisodiff/grid.hpp"
#include "anisodiff/parallel_map.hpp"

namespace anisodiff {

// In-plane tangent of the field line ODE dx/dphi = B(x). phi is the time-like
// transit variable; rhs may depend on it (slab fields do).
struct MagneticField {
  std::function<std::array<double, 2>(double x, double y, double phi)> rhs;
  double period = 2.0 * std::numbers::pi;  // phi-extent of one transit
  bool in_plane = false;                   // no transit direction (flux field)
};

inline MagneticField nimrod_field() {
  MagneticField f;
  f.in_plane = true;
  f.rhs = [](double x, double y, double) -> std::array<double, 2> {
    // B = z x grad(psi), psi = cos(pi x) cos(pi y)
    const double pi = std::numbers::pi;
    return {pi * std::cos(pi * x) * std::sin(pi * y),
            -pi * std::sin(pi * x) * std::cos(pi * y)};
  };
  return f;
}

struct SlabMode {
  int m = 0;
  int n = 0;
  double eps = 0.0;
};

inline std::vector<SlabMode> default_slab_modes() {
  return {{2, 1, 1.05e-3}, {3, 2, 0.7e-3}};
}

// Field line Hamiltonian chi = psi^2/2 + sum eps_mn psi(psi-1) cos(m theta - n zeta)
// in canonical form d(theta)/d(zeta) = dchi/dpsi, d(psi)/d(zeta) = -dchi/dtheta.
// Coordinates on the plane: x = psi, y = theta.
inline MagneticField slab_field(std::vector<SlabMode> modes = default_slab_modes()) {
  MagneticField f;
  f.period = 2.0 * std::numbers::pi;
  f.rhs = [modes](double psi, double theta, double zeta) -> std::array<double, 2> {
    double dpsi = 0.0;
    double dtheta = psi;
    for (const SlabMode& md : modes) {
      const double arg = md.m * theta - md.n * zeta;
      dtheta += md.eps * (2.0 * psi - 1.0) * std::cos(arg);
      dpsi += md.eps * psi * (psi - 1.0) * md.m * std::sin(arg);
    }
    return {dpsi, dtheta};
  };
  return f;
}

struct TraceTolerances {
  double abs_tol = 1e-6;
  double rel_tol = 1e-6;
};

enum class TraceStatus { Converged, LeftDomain };

struct TraceResult {
  std::array<double, 2> x_plus{};   // forward landing, phi = +span
  std::array<double, 2> x_minus{};  // backward landing, phi = -span
  TraceStatus status = TraceStatus::Converged;
  int steps = 0;  // accepted integrator steps, both directions
};

namespace detail {

// Dormand-Prince 5(4) with PI step-size control. Integrates from phi = 0 to
// phi = span (span may be negative) and returns the endpoint.
template <class Rhs>
std::array<double, 2> dopri5(const Rhs& rhs, std::array<double, 2> y, double span,
                             const TraceTolerances& tol, int& steps_accum) {
  if (span == 0.0) return y;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  const double dir = span > 0.0 ? 1.0 : -1.0;
  const double end = span;
  double t = 0.0;
  double h = dir * std::min(std::abs(span) / 50.0, 0.1);
  double err_old = 1e-4;
  auto f = [&](double tt, const std::array<double, 2>& yy) { return rhs(yy[0], yy[1], tt); };
  std::array<double, 2> k1 = f(t, y);
  int guard = 0;
  while (dir * (end - t) > 1e-14 * std::abs(span)) {
    if (++guard > 1000000) throw std::runtime_error("dopri5: step limit exceeded");
    if (dir * (t + h - end) > 0.0) h = end - t;
    std::array<double, 2> k2, k3, k4, k5, k6, k7, yt, y5;
    auto stage = [&](double cc, std::initializer_list<std::pair<double, const std::array<double, 2>*>> terms) {
      yt = y;
      for (auto& [a, kk] : terms) {
        yt[0] += h * a * (*kk)[0];
        yt[1] += h * a * (*kk)[1];
      }
      return f(t + cc * h, yt);
    };
    k2 = stage(c2, {{a21, &k1}});
    k3 = stage(c3, {{a31, &k1}, {a32, &k2}});
    k4 = stage(c4, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
    k5 = stage(c5, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
    k6 = stage(1.0, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
    for (int d = 0; d < 2; ++d)
      y5[d] = y[d] + h * (b1 * k1[d] + b3 * k3[d] + b4 * k4[d] + b5 * k5[d] + b6 * k6[d]);
    k7 = f(t + h, y5);
    double err = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double e = h * (e1 * k1[d] + e3 * k3[d] + e4 * k4[d] + e5 * k5[d] + e6 * k6[d] +
                            e7 * k7[d]);
      const double sc = tol.abs_tol + tol.rel_tol * std::max(std::abs(y[d]), std::abs(y5[d]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(0.5 * err);
    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;  // FSAL
      ++steps_accum;
      const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                         std::pow(err_old, 0.4 / 5.0);
      h *= std::clamp(fac, 0.2, 5.0);
      err_old = std::max(err, 1e-10);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  return y;
}

}  // namespace detail

inline TraceResult trace(const MagneticField& field, double x0, double y0, double span,
                         TraceTolerances tol = {}) {
  if (!(span > 0.0)) throw std::invalid_argument("trace: span must be positive");
  TraceResult r;
  r.x_plus = detail::dopri5(field.rhs, {x0, y0}, span, tol, r.steps);
  r.x_minus = detail::dopri5(field.rhs, {x0, y0}, -span, tol, r.steps);
  return r;
}

// Section points (one per transit) for each seed; the y coordinate is wrapped
// into [y_lo, y_lo + period_y) for output and further iteration.
inline std::vector<std::vector<std::array<double, 2>>> poincare_section(
    const MagneticField& field, const std::vector<std::array<double, 2>>& seeds, int transits,
    TraceTolerances tol = {}, double y_lo = -std::numbers::pi,
    double period_y = 2.0 * std::numbers::pi) {
  if (transits < 1) throw std::invalid_argument("poincare_section: transits must be >= 1");
  std::vector<std::vector<std::array<double, 2>>> out(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::array<double, 2> p = seeds[s];
    out[s].reserve(transits);
    int dummy = 0;
    for (int k = 0; k < transits; ++k) {
      p = detail::dopri5(field.rhs, p, field.period, tol, dummy);
      double t = std::fmod(p[1] - y_lo, period_y);
      if (t < 0.0) t += period_y;
      p[1] = y_lo + t;
      out[s].push_back(p);
    }
  }
  return out;
}

struct MapBuildOptions {
  bool periodic_y = true;
  double snap_tol = 1e-9;  // relative to the domain extent
  int threads = 0;         // 0: hardware concurrency
};

// Traces every grid node forward and backward over one span and records the
// landing stencils. Node traces are independent and run in parallel; the
// result is deterministic for fixed inputs.
inline ParallelMap build_parallel_map(const Grid2D& grid, const MagneticField& field,
                                      double span, TraceTolerances tol = {},
                                      MapBuildOptions opts = {}) {
  if (!(span > 0.0)) throw std::invalid_argument("build_parallel_map: span must be positive");
  ParallelMap map;
  map.nx = grid.nx();
  map.ny = grid.ny();
  map.forward.resize(grid.size());
  map.backward.resize(grid.size());

  const int N = grid.size();
  int nthreads = opts.threads > 0 ? opts.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  nthreads = std::min(nthreads, N);
  std::vector<std::string> failures(nthreads);

  auto worker = [&](int tid) {
    for (int k = tid; k < N; k += nthreads) {
      auto [i, j] = grid.unflat(k);
      const double x0 = grid.x(i);
      const double y0 = grid.y(j);
      try {
        TraceResult tr = trace(field, x0, y0, span, tol);
        map.forward[k] = make_landing_stencil(grid, tr.x_plus[0], tr.x_plus[1], opts.periodic_y,
                                              y0, opts.snap_tol);
        map.backward[k] = make_landing_stencil(grid, tr.x_minus[0], tr.x_minus[1],
                                               opts.periodic_y, y0, opts.snap_tol);
      } catch (const std::exception& e) {
        if (failures[tid].empty())
          failures[tid] = "node (" + std::to_string(i) + "," + std::to_string(j) + "): " +
                          e.what();
      }
    }
  };
  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (!f.empty()) throw std::runtime_error("build_parallel_map: trace failed at " + f);
  return map;
}

// --- map cache ----------------------------------------------------------------
// Versioned text format: a header line with the grid layout followed by one
// line per (direction, node) holding the four corner indices and weights.

inline void save_parallel_map(const ParallelMap& map, const Grid2D& grid,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_parallel_map: cannot open " + path);
  os.precision(17);
  os << "anisodiff-pmap 1 " << map.nx << " " << map.ny << " " << grid.gx.x_left << " "
     << grid.gx.x_right << " " << grid.gy.x_left << " " << grid.gy.x_right << "\n";
  auto dump = [&](const std::vector<LandingStencil>& st, char tag) {
    for (std::size_t k = 0; k < st.size(); ++k) {
      os << tag << " " << k;
      for (int c = 0; c < 4; ++c) os << " " << st[k].idx[c];
      for (int c = 0; c < 4; ++c) os << " " << st[k].w[c];
      os << "\n";
    }
  };
  dump(map.forward, 'f');
  dump(map.backward, 'b');
  if (!os) throw std::runtime_error("save_parallel_map: write failed for " + path);
}

inline ParallelMap load_parallel_map(const Grid2D& grid, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_parallel_map: cannot open " + path);
  std::string magic;
  int version = 0, nx = 0, ny = 0;
  double xl, xr, yl, yr;
  is >> magic >> version >> nx >> ny >> xl >> xr >> yl >> yr;
  if (magic != "anisodiff-pmap" || version != 1)
    throw std::runtime_error("load_parallel_map: bad header in " + path);
  if (nx != grid.nx() || ny != grid.ny() || xl != grid.gx.x_left || xr != grid.gx.x_right ||
      yl != grid.gy.x_left || yr != grid.gy.x_right)
    throw std::runtime_error("load_parallel_map: grid mismatch in " + path);
  ParallelMap map;
  map.nx = nx;
  map.ny = ny;
  map.forward.resize(grid.size());
  map.backward.resize(grid.size());
  char tag;
  std::size_t k;
  for (int rec = 0; rec < 2 * grid.size(); ++rec) {
    LandingStencil s;
    if (!(is >> tag >> k)) throw std::runtime_error("load_parallel_map: truncated file");
    for (int c = 0; c < 4; ++c) is >> s.idx[c];
    for (int c = 0; c < 4; ++c) is >> s.w[c];
    if (k >= static_cast<std::size_t>(grid.size()))
      throw std::runtime_error("load_parallel_map: node index out of range");
    (tag == 'f' ? map.forward : map.backward)[k] = s;
  }
  return map;
}

}  // namespace anisodiff

#endif  // ANISODIFF_FIELDLINE_HPP_
