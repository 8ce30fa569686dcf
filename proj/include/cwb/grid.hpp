#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>
#include <initializer_list>
#include <vector>

#include "cwb/errors.hpp"

namespace cwb {

using Complex = std::complex<double>;

/// One complex value per grid point, flattened in chart index order.
using Scal = Eigen::ArrayXcd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Flat torus T^d, d <= 4, with a single periodic chart and coordinate
/// period 2*pi.  Grid point (j_0,...,j_{d-1}) sits at x_a = 2*pi*j_a/n_a
/// and flattens to index j_0 + n_0*(j_1 + n_1*(j_2 + ...)).
struct TorusChart {
  int dim = 1;
  std::array<int, 4> n{4, 1, 1, 1};

  static TorusChart make(std::initializer_list<int> sizes);
  static TorusChart make(const std::vector<int>& sizes);

  long npts() const {
    long p = 1;
    for (int a = 0; a < dim; ++a) p *= n[a];
    return p;
  }
  long stride(int axis) const {
    long s = 1;
    for (int a = 0; a < axis; ++a) s *= n[a];
    return s;
  }
  /// Product of the cell widths 2*pi/n_a; quadrature weight of one point.
  double cell_volume() const {
    double v = 1;
    for (int a = 0; a < dim; ++a) v *= kTwoPi / n[a];
    return v;
  }
  bool operator==(const TorusChart& o) const { return dim == o.dim && n == o.n; }
  bool operator!=(const TorusChart& o) const { return !(*this == o); }

  /// Coordinate value x_axis at every grid point.
  Scal coordinate(int axis) const;
  /// Integer wavenumbers in FFT order: 0,1,...,n/2-1,-n/2,...,-1.
  std::vector<double> wavenumbers(int axis) const;
  /// Grid index of the point with the given per-axis indices.
  long flat_index(const std::array<int, 4>& j) const;
};

/// Spectral partial derivative along one axis (Fourier multiplier i*k,
/// Nyquist mode dropped).  Exact for band-limited data.
Scal spectral_derivative(const TorusChart& chart, const Scal& f, int axis);

/// Mean over the grid = constant Fourier mode.
Complex grid_mean(const Scal& f);

/// Fixed-order sum times the cell volume.
Complex grid_integral(const TorusChart& chart, const Scal& f);

/// In-place forward/inverse FFT along every axis (unnormalized fwd,
/// normalized inv, matching the spectral synthesis helpers).
void fft_forward(const TorusChart& chart, Scal& f);
void fft_inverse(const TorusChart& chart, Scal& f);

}  // namespace cwb
