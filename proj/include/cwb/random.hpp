#pragma once

#include <cstdint>

#include "cwb/form.hpp"

namespace cwb {

/// Deterministic generator with library-independent output (the standard
/// distributions are not pinned across implementations).
struct Rng {
  std::uint64_t state[4];

  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  /// Uniform in [-1, 1).
  double uniform();
  /// Uniform complex in the square [-1,1) x [-1,1) i.
  Complex uniform_complex();
  int uniform_int(int lo, int hi);  // inclusive bounds
};

/// Band-limited scalar field: trigonometric polynomial with modes |k_a| <= band
/// and coefficients of magnitude <= amplitude; real when `real` is set.
Scal random_band_limited(Rng& rng, const TorusChart& chart, int band, double amplitude,
                         bool real = false);

/// Band-limited r x r matrix field.
MatrixField random_matrix_field(Rng& rng, const TorusChart& chart, int rank, int band,
                                double amplitude, bool real = false);

/// Band-limited End-valued 1-form (connection coefficient material).
Form random_one_form(Rng& rng, const TorusChart& chart, int rank, int band, double amplitude,
                     bool real = false);

/// Band-limited Hermitian positive-definite metric field I + B + B^dagger
/// with ||B|| small enough to keep eigenvalues above 1/2.
MatrixField random_metric(Rng& rng, const TorusChart& chart, int rank, int band,
                          double amplitude = 0.15);

/// Pointwise-invertible field exp(X) with X band-limited of given amplitude.
MatrixField random_invertible(Rng& rng, const TorusChart& chart, int rank, int band,
                              double amplitude = 0.4);

/// Pointwise matrix exponential.
MatrixField field_exp(const MatrixField& x);

}  // namespace cwb
