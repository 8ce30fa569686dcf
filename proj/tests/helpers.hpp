#pragma once

#include <functional>

#include "cwb/connection.hpp"
#include "cwb/random.hpp"

namespace cwb::testing {

/// Sample a scalar function of the coordinates on the grid.
inline Scal sample(const TorusChart& c, const std::function<Complex(const std::array<double, 4>&)>& f) {
  Scal out(c.npts());
  std::array<double, 4> x{0, 0, 0, 0};
  for (long p = 0; p < c.npts(); ++p) {
    long q = p;
    for (int a = 0; a < c.dim; ++a) {
      const int j = static_cast<int>(q % c.n[a]);
      q /= c.n[a];
      x[a] = kTwoPi * j / c.n[a];
    }
    out[p] = f(x);
  }
  return out;
}

inline Form scalar_one_form(const TorusChart& c, int axis, const Scal& coeff) {
  Form f = Form::zero(c, 1);
  MatrixField m(1, 1, c.npts());
  m.at(0, 0) = coeff;
  f.comp.emplace(static_cast<Subset>(1u << axis), std::move(m));
  return f;
}

/// Rank-1 connection d + i theta dx_axis on any chart.
inline Connection line_connection(const TorusChart& c, double theta, int axis = 0) {
  Scal coeff = Scal::Constant(c.npts(), Complex(0.0, theta));
  return Connection::make(c, scalar_one_form(c, axis, coeff));
}

/// End-valued 1-form with a single entry pattern, for block tests.
inline Form endo_one_form(const TorusChart& c, int rank, int axis, int i, int j,
                          const Scal& coeff) {
  MatrixField m(rank, rank, c.npts());
  m.at(i, j) = coeff;
  Form f = Form::zero(c, rank);
  f.comp.emplace(static_cast<Subset>(1u << axis), std::move(m));
  return f;
}

inline Connection random_connection(Rng& rng, const TorusChart& c, int rank, int band = 2,
                                    double amp = 0.3) {
  return Connection::make(c, random_one_form(rng, c, rank, band, amp));
}

/// Random flat connection g^* (d + i diag(theta) dx_0): gauge transform of a
/// constant-coefficient flat connection.
inline Connection random_flat_connection(Rng& rng, const TorusChart& c, int rank,
                                         double theta_scale = 0.7) {
  Form coeff = Form::zero(c, rank);
  MatrixField m(rank, rank, c.npts());
  for (int i = 0; i < rank; ++i)
    m.at(i, i) = Scal::Constant(c.npts(), Complex(0.0, theta_scale * rng.uniform()));
  coeff.comp.emplace(Subset{1}, std::move(m));
  Connection base = Connection::make(c, coeff);
  MatrixField g = random_invertible(rng, c, rank, 1, 0.5);
  return pullback(base, g);
}

}  // namespace cwb::testing
