#ifndef ANISODIFF_EXPERIMENTS_HPP_
#define ANISODIFF_EXPERIMENTS_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anisodiff/fieldline.hpp"
#include "anisodiff/grid.hpp"
#include "anisodiff/io.hpp"
#include "anisodiff/parallel_map.hpp"
#include "anisodiff/perp.hpp"
#include "anisodiff/solver.hpp"

namespace anisodiff {

struct ExperimentConfig {
  std::string experiment;  // mms | nimrod | nimrod-identity | nimrod-limit | slab | trace
  int order = 2;
  std::vector<int> resolutions;
  std::vector<double> kappa_perp;
  double dt_coeff = -1.0;    // dt = c * dx^2; experiment default when < 0
  double dt_fixed = -1.0;    // fixed dt overrides dt_coeff (slab default 1.0)
  double t_final = -1.0;     // experiment default when < 0
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
  // Map construction integrates to a tighter tolerance than the Poincare
  // sections: landings near the boundary separatrix carry an exponentially
  // amplified transverse error, and the snap window below must cover it.
  double map_tol = 1e-8;
  double snap_tol = 1e-4;  // relative to the domain extent
  double trace_span = 2.0 * std::numbers::pi;
  std::string out_dir = ".";
  // slab specifics
  int slab_max_steps = 3000;
  double steady_rtol = 1e-6;
  int steady_check_every = 10;
  bool slab_integrable = false;  // drop the perturbation (all eps = 0)
  // trace specifics
  int transits = 500;
  int seed_count = 19;

  void validate() const {
    static const std::vector<std::string> known = {"mms",          "nimrod", "nimrod-identity",
                                                   "nimrod-limit", "slab",   "trace"};
    if (std::find(known.begin(), known.end(), experiment) == known.end())
      throw std::invalid_argument("unknown experiment: " + experiment);
    if (order != 2 && order != 4) throw std::invalid_argument("order must be 2 or 4");
    for (std::size_t k = 1; k < resolutions.size(); ++k)
      if (resolutions[k] <= resolutions[k - 1])
        throw std::invalid_argument("resolutions must be strictly increasing");
    for (int n : resolutions)
      if (n < sbp_min_points(order))
        throw std::invalid_argument("resolution below operator closure minimum");
    for (double k : kappa_perp)
      if (k < 0.0) throw std::invalid_argument("kappa_perp must be nonnegative");
    if (dt_coeff == 0.0 || dt_fixed == 0.0) throw std::invalid_argument("zero time step");
    if (!(tol_abs > 0.0) || !(tol_rel > 0.0))
      throw std::invalid_argument("integrator tolerances must be positive");
    if (transits < 1) throw std::invalid_argument("transits must be >= 1");
  }

  std::vector<std::string> provenance() const {
    std::vector<std::string> h;
    h.push_back("experiment = " + experiment);
    h.push_back("order = " + std::to_string(order));
    std::string rs = "resolutions =";
    for (int n : resolutions) rs += " " + std::to_string(n);
    h.push_back(rs);
    std::string ks = "kappa_perp =";
    for (double k : kappa_perp) ks += " " + format_double(k);
    h.push_back(ks);
    h.push_back("dt_coeff = " + format_double(dt_coeff));
    h.push_back("dt_fixed = " + format_double(dt_fixed));
    h.push_back("t_final = " + format_double(t_final));
    h.push_back("tol_abs = " + format_double(tol_abs));
    h.push_back("tol_rel = " + format_double(tol_rel));
    h.push_back("map_tol = " + format_double(map_tol));
    h.push_back("snap_tol = " + format_double(snap_tol));
    h.push_back("trace_span = " + format_double(trace_span));
    h.push_back("error_norm = relative l2 (uniform quadrature)");
    return h;
  }
};

inline double relative_l2_error(std::span<const double> u, std::span<const double> exact,
                                const Grid2D& grid) {
  double num = 0.0, den = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    const double d = u[k] - exact[k];
    num += d * d;
    den += exact[k] * exact[k];
  }
  return std::sqrt(num / den);
}

struct LabeledTable {
  int order = 2;
  double kappa = 1.0;
  ConvergenceTable table;
};

// --- MMS (manufactured solution, perpendicular operator only) -----------------

namespace mms {
constexpr double omega_x = 7.0;
constexpr double omega_y = 6.0;
constexpr double c_x = 1.0;
constexpr double c_y = 0.0;

inline double exact(double x, double y, double t) {
  return std::cos(2.0 * std::numbers::pi * t) *
         std::sin(2.0 * std::numbers::pi * omega_x * x + c_x) *
         std::sin(2.0 * std::numbers::pi * omega_y * y + c_y);
}

inline double source(double x, double y, double t, double kappa) {
  const double pi = std::numbers::pi;
  const double space = std::sin(2.0 * pi * omega_x * x + c_x) *
                       std::sin(2.0 * pi * omega_y * y + c_y);
  return (-2.0 * pi * std::sin(2.0 * pi * t) +
          kappa * 4.0 * pi * pi * (omega_x * omega_x + omega_y * omega_y) *
              std::cos(2.0 * pi * t)) *
         space;
}
}  // namespace mms

inline double run_mms_single(int order, int n, double kappa, double dt_coeff, double t_final,
                             std::vector<StepDiagnostics>* diag = nullptr) {
  Grid2D grid = make_grid_2d(0.0, 1.0, n, 0.0, 1.0, n);
  Problem p;
  p.grid = &grid;
  p.kappa_perp = kappa;
  p.perp = make_perp_operator(grid, order, kappa, YBoundary::Periodic);
  p.perp->g_left = [](double y, double t) { return mms::exact(0.0, y, t); };
  p.perp->g_right = [](double y, double t) { return mms::exact(1.0, y, t); };
  p.source = [kappa](double x, double y, double t) { return mms::source(x, y, t, kappa); };
  p.initial = [](double x, double y) { return mms::exact(x, y, 0.0); };
  const double dt = dt_coeff * grid.gx.dx * grid.gx.dx;
  RunResult rr = run(p, dt, t_final);
  std::vector<double> ex(grid.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ex[grid.flat(i, j)] = mms::exact(grid.x(i), grid.y(j), t_final);
  if (diag) *diag = rr.state.diagnostics;
  return relative_l2_error(rr.state.u, ex, grid);
}

namespace nimrod {
inline double psi(double x, double y) {
  return std::cos(std::numbers::pi * x) * std::cos(std::numbers::pi * y);
}
inline double exact(double x, double y, double t, double kappa) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  if (kappa == 0.0) return 2.0 * pi2 * t * psi(x, y);  // L'Hopital limit
  return (1.0 - std::exp(-2.0 * t * kappa * pi2)) / kappa * psi(x, y);
}
inline double default_t_final() { return 1.0 / (2.0 * std::numbers::pi * std::numbers::pi); }
}  // namespace nimrod

inline ExperimentConfig resolve_defaults(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  if (c.experiment == "mms") {
    if (c.resolutions.empty()) c.resolutions = {21, 41, 61, 81};
    if (c.kappa_perp.empty()) c.kappa_perp = {1.0};
    if (c.dt_coeff < 0.0) c.dt_coeff = 0.01;
    if (c.t_final < 0.0) c.t_final = 0.1;
  } else if (c.experiment.rfind("nimrod", 0) == 0) {
    if (c.resolutions.empty()) c.resolutions = {17, 25, 33, 41, 49, 57};
    if (c.kappa_perp.empty()) {
      if (c.experiment == "nimrod-limit")
        c.kappa_perp = {0.0};
      else if (c.experiment == "nimrod-identity")
        c.kappa_perp = {1.0, 1e-3, 1e-6};
      else
        c.kappa_perp = {1.0, 1e-3, 1e-6, 1e-9};
    }
    if (c.dt_coeff < 0.0) c.dt_coeff = 0.1;
    if (c.t_final < 0.0) c.t_final = nimrod::default_t_final();
  } else if (c.experiment == "slab") {
    if (c.resolutions.empty()) c.resolutions = {129};
    if (c.kappa_perp.empty()) c.kappa_perp = {1e-8};
    if (c.dt_fixed < 0.0 && c.dt_coeff < 0.0) c.dt_fixed = 1.0;
  }
  c.validate();
  return c;
}

inline std::vector<LabeledTable> run_mms(const ExperimentConfig& cfg) {
  ExperimentConfig c = resolve_defaults(cfg);
  std::vector<LabeledTable> out;
  for (double kappa : c.kappa_perp) {
    if (!(kappa > 0.0))
      throw std::invalid_argument("run_mms: kappa_perp must be positive for the MMS study");
    LabeledTable lt;
    lt.order = c.order;
    lt.kappa = kappa;
    for (int n : c.resolutions) {
      lt.table.n.push_back(n);
      lt.table.error.push_back(run_mms_single(c.order, n, kappa, c.dt_coeff, c.t_final));
    }
    lt.table.slope = fit_slope(lt.table);
    out.push_back(std::move(lt));
  }
  return out;
}

// --- NIMROD benchmark ----------------------------------------------------------

enum class NimrodVariant { Traced, Identity, Limit };

inline NimrodVariant nimrod_variant_of(const std::string& experiment) {
  if (experiment == "nimrod") return NimrodVariant::Traced;
  if (experiment == "nimrod-identity") return NimrodVariant::Identity;
  if (experiment == "nimrod-limit") return NimrodVariant::Limit;
  throw std::invalid_argument("not a nimrod experiment: " + experiment);
}

// One benchmark run; the map is supplied by the caller so it can be reused
// across kappa values on the same grid.
inline double run_nimrod_single(const Grid2D& grid, int order, double kappa,
                                const ParallelMap& map, double dt_coeff, double t_final,
                                SolverState* final_state = nullptr) {
  Problem p;
  p.grid = &grid;
  p.kappa_perp = kappa;
  if (kappa > 0.0) {
    // the benchmark solution vanishes on all four edges; both directions get
    // homogeneous Dirichlet treatment (the exact solution is not derivative
    // periodic in y, so the periodic SAT would converge to the wrong torus
    // solution)
    p.perp = make_perp_operator(grid, order, kappa, YBoundary::Dirichlet);
  }
  p.map = &map;
  p.penalty = ParallelPenalty{default_tau_par(grid), 1.0};
  const double pi2 = std::numbers::pi * std::numbers::pi;
  p.source = [pi2](double x, double y, double) { return 2.0 * pi2 * nimrod::psi(x, y); };
  p.initial = nullptr;  // u(0) = 0
  const double dt = dt_coeff * grid.gx.dx * grid.gx.dx;
  RunResult rr = run(p, dt, t_final);
  std::vector<double> ex(grid.size());
  for (int i = 0; i < grid.nx(); ++i)
    for (int j = 0; j < grid.ny(); ++j)
      ex[grid.flat(i, j)] = nimrod::exact(grid.x(i), grid.y(j), t_final, kappa);
  if (final_state) *final_state = rr.state;
  return relative_l2_error(rr.state.u, ex, grid);
}

inline std::vector<LabeledTable> run_nimrod(const ExperimentConfig& cfg) {
  ExperimentConfig c = resolve_defaults(cfg);
  const NimrodVariant variant = nimrod_variant_of(c.experiment);

  std::vector<LabeledTable> out;
  for (double kappa : c.kappa_perp) {
    out.push_back(LabeledTable{c.order, kappa, {}});
  }
  MagneticField field = nimrod_field();
  TraceTolerances map_tol{c.map_tol, c.map_tol};
  for (int n : c.resolutions) {
    Grid2D grid = make_grid_2d(-0.5, 0.5, n, -0.5, 0.5, n);
    ParallelMap map;
    if (variant == NimrodVariant::Identity) {
      map = ParallelMap::identity(grid);
    } else {
      MapBuildOptions opts;
      opts.periodic_y = false;  // confined in-plane field, Dirichlet box
      opts.snap_tol = c.snap_tol;
      map = build_parallel_map(grid, field, c.trace_span, map_tol, opts);
    }
    for (std::size_t kk = 0; kk < c.kappa_perp.size(); ++kk) {
      const double err =
          run_nimrod_single(grid, c.order, c.kappa_perp[kk], map, c.dt_coeff, c.t_final);
      out[kk].table.n.push_back(n);
      out[kk].table.error.push_back(err);
    }
  }
  for (auto& lt : out) lt.table.slope = fit_slope(lt.table);
  return out;
}

// --- periodic slab -------------------------------------------------------------

// Marching-squares level segments on the structured grid.
struct ContourSegment {
  double x1, y1, x2, y2;
};

inline std::vector<ContourSegment> contour_segments(std::span<const double> u,
                                                    const Grid2D& grid, double level) {
  std::vector<ContourSegment> segs;
  auto interp = [&](double a, double b, double ca, double cb) {
    return ca + (level - a) / (b - a) * (cb - ca);
  };
  for (int i = 0; i + 1 < grid.nx(); ++i) {
    for (int j = 0; j + 1 < grid.ny(); ++j) {
      const double v00 = u[grid.flat(i, j)], v01 = u[grid.flat(i, j + 1)];
      const double v10 = u[grid.flat(i + 1, j)], v11 = u[grid.flat(i + 1, j + 1)];
      const double x0 = grid.x(i), x1c = grid.x(i + 1);
      const double y0 = grid.y(j), y1c = grid.y(j + 1);
      int idx = (v00 > level) | ((v10 > level) << 1) | ((v11 > level) << 2) |
                ((v01 > level) << 3);
      if (idx == 0 || idx == 15) continue;
      // edge intersection points (bottom, right, top, left)
      double bx = 0, by = y0, rx = x1c, ry = 0, tx = 0, ty = y1c, lx = x0, ly = 0;
      const bool cb = (v00 > level) != (v10 > level);
      const bool cr = (v10 > level) != (v11 > level);
      const bool ct = (v01 > level) != (v11 > level);
      const bool cl = (v00 > level) != (v01 > level);
      if (cb) bx = interp(v00, v10, x0, x1c);
      if (cr) ry = interp(v10, v11, y0, y1c);
      if (ct) tx = interp(v01, v11, x0, x1c);
      if (cl) ly = interp(v00, v01, y0, y1c);
      auto add = [&](double ax, double ay, double bx2, double by2) {
        segs.push_back({ax, ay, bx2, by2});
      };
      switch (idx) {
        case 1: case 14: add(lx, ly, bx, by); break;
        case 2: case 13: add(bx, by, rx, ry); break;
        case 3: case 12: add(lx, ly, rx, ry); break;
        case 4: case 11: add(tx, ty, rx, ry); break;
        case 6: case 9:  add(bx, by, tx, ty); break;
        case 7: case 8:  add(lx, ly, tx, ty); break;
        case 5: case 10: {
          // saddle: resolve by the cell-center value
          const double mid = 0.25 * (v00 + v01 + v10 + v11);
          const bool center_hi = mid > level;
          if ((idx == 5) == center_hi) {
            add(lx, ly, tx, ty);
            add(bx, by, rx, ry);
          } else {
            add(lx, ly, bx, by);
            add(tx, ty, rx, ry);
          }
          break;
        }
        default: break;
      }
    }
  }
  return segs;
}

struct SlabResult {
  Grid2D grid;
  std::vector<double> temperature;
  int steps = 0;
  double final_time = 0.0;
  bool reached_steady = false;
  double max_ramp_deviation = 0.0;   // max|T - psi| (integrable diagnostics)
  double min_band_slope = 1.0;       // min dT/dpsi over psi in [0.45, 0.7] at theta = 0
  double contour_level = 0.0;        // T(0.495, -pi, t_f)
  double contour_psi_min = 0.0, contour_psi_max = 0.0;
  double island_psi_min = 0.0, island_psi_max = 0.0;
  bool contour_overlaps_island = false;
};

inline SlabResult run_slab(const ExperimentConfig& cfg) {
  ExperimentConfig c = resolve_defaults(cfg);
  const int n = c.resolutions.back();
  const double kappa = c.kappa_perp.back();
  const double pi = std::numbers::pi;

  Grid2D grid = make_grid_2d(0.0, 1.0, n, -pi, pi, n);
  MagneticField field =
      c.slab_integrable ? slab_field(std::vector<SlabMode>{}) : slab_field();
  TraceTolerances map_tol{c.map_tol, c.map_tol};
  MapBuildOptions opts;
  opts.periodic_y = true;
  opts.snap_tol = c.snap_tol;
  ParallelMap map = build_parallel_map(grid, field, field.period, map_tol, opts);

  Problem p;
  p.grid = &grid;
  p.kappa_perp = kappa;
  if (kappa > 0.0) {
    p.perp = make_perp_operator(grid, c.order, kappa, YBoundary::Periodic);
    p.perp->g_left = [](double, double) { return 0.0; };   // T(0) = 0
    p.perp->g_right = [](double, double) { return 1.0; };  // T(1) = 1
  }
  p.map = &map;
  p.penalty = ParallelPenalty{default_tau_par(grid), 1.0};
  p.initial = [](double psi, double) { return psi; };  // ramp

  const double dt = c.dt_fixed > 0.0 ? c.dt_fixed : c.dt_coeff * grid.gx.dx * grid.gx.dx;
  SolverState state = init_state(p);
  std::vector<double> prev_snapshot = state.u;
  SlabResult res;
  res.reached_steady = false;
  const double t_cap = c.t_final > 0.0 ? c.t_final : dt * c.slab_max_steps;
  while (state.t < t_cap - 1e-12 && state.step < c.slab_max_steps) {
    step(p, state, std::min(dt, t_cap - state.t));
    if (state.step % c.steady_check_every == 0) {
      double num = 0.0, den = 0.0;
      for (int k = 0; k < grid.size(); ++k) {
        const double d = state.u[k] - prev_snapshot[k];
        num += d * d;
        den += state.u[k] * state.u[k];
      }
      if (std::sqrt(num / std::max(den, 1e-300)) < c.steady_rtol) {
        res.reached_steady = true;
        break;
      }
      prev_snapshot = state.u;
    }
  }

  res.grid = grid;
  res.temperature = state.u;
  res.steps = state.step;
  res.final_time = state.t;

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      res.max_ramp_deviation =
          std::max(res.max_ramp_deviation, std::abs(state.u[grid.flat(i, j)] - grid.x(i)));

  // profile slope at theta = 0 (middle row for odd n)
  const int j0 = (n - 1) / 2;
  res.min_band_slope = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < n; ++i) {
    const double psi = grid.x(i);
    if (psi < 0.45 || psi > 0.7) continue;
    const double slope = (state.u[grid.flat(i + 1, j0)] - state.u[grid.flat(i - 1, j0)]) /
                         (2.0 * grid.gx.dx);
    res.min_band_slope = std::min(res.min_band_slope, slope);
  }

  // contour through (psi = 0.495, theta = -pi) and the psi = 1/2 island band
  {
    const double psi0 = 0.495;
    int i0 = static_cast<int>(psi0 / grid.gx.dx);
    const double fx = (psi0 - grid.x(i0)) / grid.gx.dx;
    res.contour_level = (1.0 - fx) * state.u[grid.flat(i0, 0)] +
                        fx * state.u[grid.flat(i0 + 1, 0)];
    auto segs = contour_segments(state.u, grid, res.contour_level);
    double lo = 1e300, hi = -1e300;
    for (const auto& s : segs) {
      lo = std::min({lo, s.x1, s.x2});
      hi = std::max({hi, s.x1, s.x2});
    }
    res.contour_psi_min = lo;
    res.contour_psi_max = hi;

    MagneticField exact_field = slab_field();
    auto sections = poincare_section(exact_field, {{psi0, -pi}}, c.transits,
                                     TraceTolerances{c.tol_abs, c.tol_rel});
    double plo = 1e300, phi = -1e300;
    for (const auto& pt : sections[0]) {
      plo = std::min(plo, pt[0]);
      phi = std::max(phi, pt[0]);
    }
    res.island_psi_min = plo;
    res.island_psi_max = phi;
    res.contour_overlaps_island = std::max(lo, plo) <= std::min(hi, phi);
  }
  return res;
}

inline void write_slab_outputs(const SlabResult& res, const ExperimentConfig& raw) {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = resolve_defaults(raw);
  fs::create_directories(cfg.out_dir);
  auto hdr = cfg.provenance();
  hdr.push_back("steps = " + std::to_string(res.steps));
  hdr.push_back("final_time = " + format_double(res.final_time));
  write_field(res.temperature, res.grid, cfg.out_dir + "/slab_field.tsv", hdr);

  // contour export: regular levels every 0.05 plus the island-tracking level
  std::ofstream os = open_output(cfg.out_dir + "/slab_contours.tsv");
  for (const auto& h : hdr) os << "# " << h << "\n";
  os << "# columns: level\tx1\ty1\tx2\ty2\n";
  std::vector<double> levels;
  for (double L = 0.05; L < 0.951; L += 0.05) levels.push_back(L);
  levels.push_back(res.contour_level);
  for (double L : levels)
    for (const auto& s : contour_segments(res.temperature, res.grid, L))
      os << format_double(L) << "\t" << format_double(s.x1) << "\t" << format_double(s.y1)
         << "\t" << format_double(s.x2) << "\t" << format_double(s.y2) << "\n";

  // Poincare overlay
  MagneticField field = slab_field();
  std::vector<std::array<double, 2>> seeds;
  for (int s = 0; s < cfg.seed_count; ++s)
    seeds.push_back({0.05 + 0.9 * s / std::max(1, cfg.seed_count - 1), 0.0});
  seeds.push_back({0.495, -std::numbers::pi});
  seeds.push_back({0.675, 0.0});
  auto sections = poincare_section(field, seeds, std::min(cfg.transits, 300),
                                   TraceTolerances{cfg.tol_abs, cfg.tol_rel});
  std::ofstream ps = open_output(cfg.out_dir + "/slab_poincare.tsv");
  for (const auto& h : hdr) ps << "# " << h << "\n";
  ps << "# columns: seed\ttransit\tpsi\ttheta\n";
  for (std::size_t s = 0; s < sections.size(); ++s)
    for (std::size_t k = 0; k < sections[s].size(); ++k)
      ps << s << "\t" << k + 1 << "\t" << format_double(sections[s][k][0]) << "\t"
         << format_double(sections[s][k][1]) << "\n";
}

// --- Poincare section export (trace subcommand) --------------------------------

inline void run_trace(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  MagneticField field = slab_field();
  std::vector<std::array<double, 2>> seeds;
  for (int s = 0; s < cfg.seed_count; ++s)
    seeds.push_back({0.05 + 0.9 * s / std::max(1, cfg.seed_count - 1), 0.0});
  auto sections =
      poincare_section(field, seeds, cfg.transits, TraceTolerances{cfg.tol_abs, cfg.tol_rel});
  std::ofstream os = open_output(cfg.out_dir + "/poincare.tsv");
  for (const auto& h : cfg.provenance()) os << "# " << h << "\n";
  os << "# columns: seed\ttransit\tpsi\ttheta\n";
  for (std::size_t s = 0; s < sections.size(); ++s)
    for (std::size_t k = 0; k < sections[s].size(); ++k)
      os << s << "\t" << k + 1 << "\t" << format_double(sections[s][k][0]) << "\t"
         << format_double(sections[s][k][1]) << "\n";
}

inline std::string table_filename(const ExperimentConfig& cfg, const LabeledTable& lt) {
  std::ostringstream name;
  name << cfg.experiment << "_o" << lt.order << "_k" << format_double(lt.kappa, 6) << ".tsv";
  return cfg.out_dir + "/" + name.str();
}

}  // namespace anisodiff

#endif  // ANISODIFF_EXPERIMENTS_HPP_
