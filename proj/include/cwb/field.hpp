#pragma once

#include <Eigen/Dense>

#include "cwb/grid.hpp"

namespace cwb {

/// Field of complex rows x cols matrices over a grid, stored entrywise as
/// arrays over the grid so pointwise algebra maps onto Eigen array ops.
struct MatrixField {
  int rows = 0, cols = 0;
  long npts = 0;
  std::vector<Scal> e;  // e[i*cols + j]

  MatrixField() = default;
  MatrixField(int r, int c, long np) : rows(r), cols(c), npts(np), e(static_cast<size_t>(r) * c) {
    for (auto& a : e) a = Scal::Zero(np);
  }

  static MatrixField identity(int r, long np);
  static MatrixField constant(const Eigen::MatrixXcd& m, long np);

  Scal& at(int i, int j) { return e[static_cast<size_t>(i) * cols + j]; }
  const Scal& at(int i, int j) const { return e[static_cast<size_t>(i) * cols + j]; }

  Eigen::MatrixXcd point(long p) const;
  void set_point(long p, const Eigen::MatrixXcd& m);

  MatrixField adjoint() const;    // pointwise conjugate transpose
  MatrixField transpose() const;
  MatrixField conjugate() const;
  MatrixField inverse() const;    // pointwise inverse; throws NotInvertible
  Scal trace() const;
  Scal det() const;

  double max_abs() const;
  double max_imag() const;
  /// Smallest singular value over all points.
  double min_singular() const;
  /// Largest condition number over all points.
  double max_condition() const;
  /// Smallest eigenvalue over all points, for Hermitian fields.
  double min_eig_hermitian() const;

  MatrixField block(int i0, int j0, int r, int c) const;

  MatrixField& operator+=(const MatrixField& o);
  MatrixField& operator-=(const MatrixField& o);
  MatrixField& operator*=(Complex s);
};

MatrixField operator+(MatrixField a, const MatrixField& b);
MatrixField operator-(MatrixField a, const MatrixField& b);
MatrixField operator*(Complex s, MatrixField a);
/// Pointwise matrix product.
MatrixField operator*(const MatrixField& a, const MatrixField& b);
/// Pointwise scaling by a scalar field.
MatrixField scale(const Scal& s, const MatrixField& a);
/// Block-diagonal direct sum.
MatrixField direct_sum(const MatrixField& a, const MatrixField& b);

}  // namespace cwb
