#pragma once

// Piecewise-linear input linking: node inputs of every disturbance case are
// tied to one shared, time-indexed control-point signal.

#include <map>
#include <span>
#include <vector>

namespace aslip {

/// Index of the interpolation segment used for `xq`: segment i covers
/// (x_i, x_{i+1}], the first segment also covers everything below and the last
/// everything above. Knot-coincident queries resolve to the left segment.
/// Throws InvalidGrid unless x is strictly increasing with at least two points.
std::size_t segment_index(std::span<const double> x, double xq);

/// Piecewise-linear interpolation with linear extrapolation from the end segments.
double lin_interp(std::span<const double> x, std::span<const double> v, double xq);

/// Zero-order hold: v_i on (x_i, x_{i+1}], v_1 below, v_N above x_N.
double zoh(std::span<const double> x, std::span<const double> v, double xq);

/// Slope of lin_interp at `xq` (left segment at knots).
double lin_interp_slope(std::span<const double> x, std::span<const double> v, double xq);

/// Evenly spaced control points on [0, horizon].
struct ControlGrid {
  double horizon = 0.0;
  std::vector<double> values;

  std::size_t count() const { return values.size(); }
  std::vector<double> times() const;
  double value_at(double t) const;
};

/// Residual of u_k = LI(T, U, t_k).
double linking_constraint(double u_k, double t_k, const ControlGrid& grid);

/// Sparse gradient with respect to decision variables, keyed by variable index.
using SparseGradient = std::map<int, double>;

/// Gradient of u_k - LI(T, U, t_k) given the sensitivities of each argument to
/// the decision variables. `grid_times` and `grid_values` are T and U; `dT` and
/// `dU` hold one sensitivity per control point.
SparseGradient linking_gradient(double t_k, std::span<const double> grid_times,
                                std::span<const double> grid_values, const SparseGradient& du,
                                const SparseGradient& dt, std::span<const SparseGradient> dT,
                                std::span<const SparseGradient> dU);

/// First and second time integrals of the grid signal from 0 to t,
/// V(t) = int_0^t LI and W(t) = int_0^t V, with partials with respect to the
/// grid values and the horizon. dV/dt = LI(t) and dW/dt = V(t).
struct GridIntegral {
  double first = 0.0;
  double second = 0.0;
  std::vector<double> d_values_first;
  std::vector<double> d_values_second;
  double d_horizon_first = 0.0;
  double d_horizon_second = 0.0;
};

/// Throws InvalidGrid unless the grid has at least two points and a positive horizon.
GridIntegral integrate_grid(const ControlGrid& grid, double t);

}  // namespace aslip
