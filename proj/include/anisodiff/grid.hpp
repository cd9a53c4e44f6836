#ifndef ANISODIFF_GRID_HPP_
#define ANISODIFF_GRID_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anisodiff {

// Uniform 1D grid, endpoints included. Point j (0-based) sits at
// x_left + j*dx with dx = (x_right - x_left)/(n - 1).
struct Grid1D {
  double x_left = 0.0;
  double x_right = 1.0;
  int n = 2;
  double dx = 1.0;

  double point(int j) const { return x_left + j * dx; }
  double length() const { return x_right - x_left; }
};

inline Grid1D make_grid_1d(double x_left, double x_right, int n) {
  if (n < 2)
    throw std::invalid_argument("make_grid_1d: need at least 2 points, got " + std::to_string(n));
  if (!(x_left < x_right))
    throw std::invalid_argument("make_grid_1d: degenerate interval");
  Grid1D g;
  g.x_left = x_left;
  g.x_right = x_right;
  g.n = n;
  g.dx = (x_right - x_left) / (n - 1);
  return g;
}

// Tensor-product grid. Grid functions are flattened with the x index outermost
// (flat(i,j) = i*ny + j) so a 1D operator in x acts across blocks of length ny
// and a 1D operator in y acts within a contiguous block, matching the
// Kronecker forms Ax (x) Iy and Ix (x) Ay.
struct Grid2D {
  Grid1D gx;
  Grid1D gy;

  int nx() const { return gx.n; }
  int ny() const { return gy.n; }
  int size() const { return gx.n * gy.n; }
  double x(int i) const { return gx.point(i); }
  double y(int j) const { return gy.point(j); }

  int flat(int i, int j) const {
    if (i < 0 || i >= gx.n || j < 0 || j >= gy.n)
      throw std::out_of_range("Grid2D::flat: index (" + std::to_string(i) + "," +
                              std::to_string(j) + ") outside " + std::to_string(gx.n) + "x" +
                              std::to_string(gy.n) + " grid");
    return i * gy.n + j;
  }

  std::pair<int, int> unflat(int k) const {
    if (k < 0 || k >= size()) throw std::out_of_range("Grid2D::unflat: index out of range");
    return {k / gy.n, k % gy.n};
  }
};

inline Grid2D make_grid_2d(double xl, double xr, int nx, double yl, double yr, int ny) {
  return Grid2D{make_grid_1d(xl, xr, nx), make_grid_1d(yl, yr, ny)};
}

// Dimensionless quadrature weights of the SBP norm H = dx*diag(h).
// sum_j dx*h_j equals the interval length for the composite rules used here.
struct NormWeights {
  std::vector<double> h;
  double dx = 1.0;
};

inline void check_length(std::span<const double> u, const Grid2D& grid, const char* who) {
  if (static_cast<int>(u.size()) != grid.size())
    throw std::invalid_argument(std::string(who) + ": vector length " +
                                std::to_string(u.size()) + " does not match grid size " +
                                std::to_string(grid.size()));
}

// ||u||_H = sqrt(sum_ij u_ij^2 * (dx h_i)(dy h_j))
inline double h_norm(std::span<const double> u, const Grid2D& grid, const NormWeights& wx,
                     const NormWeights& wy) {
  check_length(u, grid, "h_norm");
  if (static_cast<int>(wx.h.size()) != grid.nx() || static_cast<int>(wy.h.size()) != grid.ny())
    throw std::invalid_argument("h_norm: weight lengths do not match grid");
  double acc = 0.0;
  const int ny = grid.ny();
  for (int i = 0; i < grid.nx(); ++i) {
    const double wxi = wx.dx * wx.h[i];
    double row = 0.0;
    for (int j = 0; j < ny; ++j) {
      const double v = u[i * ny + j];
      row += v * v * wy.h[j];
    }
    acc += wxi * wy.dx * row;
  }
  return std::sqrt(acc);
}

// Uniform quadrature norm ||u||_l2 = sqrt(dx dy sum u^2).
inline double l2_norm(std::span<const double> u, const Grid2D& grid) {
  check_length(u, grid, "l2_norm");
  double acc = 0.0;
  for (double v : u) acc += v * v;
  return std::sqrt(grid.gx.dx * grid.gy.dx * acc);
}

}  // namespace anisodiff

#endif  // ANISODIFF_GRID_HPP_
