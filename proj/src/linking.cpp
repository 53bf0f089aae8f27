#include "aslip/linking.hpp"

#include <algorithm>
#include <string>

#include "aslip/error.hpp"

namespace aslip {

namespace {

void check_grid(std::span<const double> x, std::span<const double> v, std::size_t min_points) {
  if (x.size() != v.size())
    throw Error(ErrorCode::InvalidGrid, "sample and value sizes differ");
  if (x.size() < min_points)
    throw Error(ErrorCode::InvalidGrid, "need at least " + std::to_string(min_points) + " points");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw Error(ErrorCode::InvalidGrid, "samples not strictly increasing");
}

// First index j with x_j >= xq, minus one: the interval (x_{j-1}, x_j] holding xq.
std::ptrdiff_t left_index(std::span<const double> x, double xq) {
  return std::lower_bound(x.begin(), x.end(), xq) - x.begin() - 1;
}

void axpy(SparseGradient& out, double a, const SparseGradient& in) {
  if (a == 0.0) return;
  for (const auto& [k, v] : in) out[k] += a * v;
}

}  // namespace

std::size_t segment_index(std::span<const double> x, double xq) {
  const auto i = left_index(x, xq);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, std::ssize(x) - 2));
}

double lin_interp(std::span<const double> x, std::span<const double> v, double xq) {
  check_grid(x, v, 2);
  const std::size_t i = segment_index(x, xq);
  const double h = x[i + 1] - x[i];
  return (x[i + 1] - xq) / h * v[i] + (xq - x[i]) / h * v[i + 1];
}

double zoh(std::span<const double> x, std::span<const double> v, double xq) {
  check_grid(x, v, 1);
  const auto i = std::clamp<std::ptrdiff_t>(left_index(x, xq), 0, std::ssize(x) - 1);
  return v[static_cast<std::size_t>(i)];
}

double lin_interp_slope(std::span<const double> x, std::span<const double> v, double xq) {
  check_grid(x, v, 2);
  const std::size_t i = segment_index(x, xq);
  return (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
}

std::vector<double> ControlGrid::times() const {
  const std::size_t m = values.size();
  std::vector<double> t(m);
  for (std::size_t j = 0; j < m; ++j)
    t[j] = m > 1 ? horizon * static_cast<double>(j) / static_cast<double>(m - 1) : 0.0;
  return t;
}

double ControlGrid::value_at(double t) const {
  const auto T = times();
  return lin_interp(T, values, t);
}

double linking_constraint(double u_k, double t_k, const ControlGrid& grid) {
  return u_k - grid.value_at(t_k);
}

SparseGradient linking_gradient(double t_k, std::span<const double> grid_times,
                                std::span<const double> grid_values, const SparseGradient& du,
                                const SparseGradient& dt, std::span<const SparseGradient> dT,
                                std::span<const SparseGradient> dU) {
  check_grid(grid_times, grid_values, 2);
  if (dT.size() != grid_times.size() || dU.size() != grid_times.size())
    throw Error(ErrorCode::InvalidGrid, "sensitivity count differs from control-point count");

  const std::size_t m = grid_times.size();
  std::vector<double> slopes(m - 1);
  for (std::size_t j = 0; j + 1 < m; ++j)
    slopes[j] = (grid_values[j + 1] - grid_values[j]) / (grid_times[j + 1] - grid_times[j]);
  const double s = zoh(grid_times.first(m - 1), slopes, t_k);

  const std::size_t i = segment_index(grid_times, t_k);
  const double w = (t_k - grid_times[i]) / (grid_times[i + 1] - grid_times[i]);

  SparseGradient g = du;
  axpy(g, -s, dt);
  axpy(g, s * (1.0 - w), dT[i]);
  axpy(g, s * w, dT[i + 1]);
  axpy(g, -(1.0 - w), dU[i]);
  axpy(g, -w, dU[i + 1]);
  return g;
}

GridIntegral integrate_grid(const ControlGrid& grid, double t) {
  const std::size_t m = grid.values.size();
  if (m < 2 || !(grid.horizon > 0.0))
    throw Error(ErrorCode::InvalidGrid, "grid integral needs two points and a positive horizon");
  const double delta = grid.horizon / static_cast<double>(m - 1);
  const double s = t / delta;

  // a_j, b_j: first and second integrals of the j-th hat function in grid units,
  // with the end segments extended linearly.
  std::vector<double> a(m, 0.0), b(m, 0.0);
  auto piece = [&](std::size_t i, double xi) {
    for (std::size_t j = 0; j < m; ++j) b[j] += a[j] * xi;
    b[i] += xi * xi / 2 - xi * xi * xi / 6;
    b[i + 1] += xi * xi * xi / 6;
    a[i] += xi - xi * xi / 2;
    a[i + 1] += xi * xi / 2;
  };
  if (s <= 0.0) {
    piece(0, s);
  } else {
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const bool last = i + 2 == m;
      piece(i, last ? s - static_cast<double>(i) : std::min(s - static_cast<double>(i), 1.0));
      if (last || s <= static_cast<double>(i + 1)) break;
    }
  }

  double F = 0.0, G = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    F += a[j] * grid.values[j];
    G += b[j] * grid.values[j];
  }
  const double f = grid.value_at(t);

  GridIntegral out;
  out.first = delta * F;
  out.second = delta * delta * G;
  out.d_values_first.resize(m);
  out.d_values_second.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    out.d_values_first[j] = delta * a[j];
    out.d_values_second[j] = delta * delta * b[j];
  }
  const double per = 1.0 / static_cast<double>(m - 1);
  out.d_horizon_first = (F - s * f) * per;
  out.d_horizon_second = (2 * delta * G - delta * s * F) * per;
  return out;
}

}  // namespace aslip

