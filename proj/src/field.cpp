#include "cwb/field.hpp"

#include <Eigen/SVD>

namespace cwb {

MatrixField MatrixField::identity(int r, long np) {
  MatrixField f(r, r, np);
  for (int i = 0; i < r; ++i) f.at(i, i) = Scal::Constant(np, Complex(1.0, 0.0));
  return f;
}

MatrixField MatrixField::constant(const Eigen::MatrixXcd& m, long np) {
  MatrixField f(static_cast<int>(m.rows()), static_cast<int>(m.cols()), np);
  for (int i = 0; i < f.rows; ++i)
    for (int j = 0; j < f.cols; ++j) f.at(i, j) = Scal::Constant(np, m(i, j));
  return f;
}

Eigen::MatrixXcd MatrixField::point(long p) const {
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = at(i, j)[p];
  return m;
}

void MatrixField::set_point(long p, const Eigen::MatrixXcd& m) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) at(i, j)[p] = m(i, j);
}

MatrixField MatrixField::adjoint() const {
  MatrixField f(cols, rows, npts);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) f.at(j, i) = at(i, j).conjugate();
  return f;
}

MatrixField MatrixField::transpose() const {
  MatrixField f(cols, rows, npts);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) f.at(j, i) = at(i, j);
  return f;
}

MatrixField MatrixField::conjugate() const {
  MatrixField f(rows, cols, npts);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) f.at(i, j) = at(i, j).conjugate();
  return f;
}

MatrixField MatrixField::inverse() const {
  if (rows != cols) throw NotInvertible("inverse of non-square field");
  MatrixField f(rows, cols, npts);
  Eigen::MatrixXcd m(rows, cols);
  for (long p = 0; p < npts; ++p) {
    m = point(p);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
    if (!lu.isInvertible()) throw NotInvertible("matrix field singular at a grid point");
    f.set_point(p, lu.inverse());
  }
  return f;
}

Scal MatrixField::trace() const {
  Scal t = Scal::Zero(npts);
  for (int i = 0; i < std::min(rows, cols); ++i) t += at(i, i);
  return t;
}

Scal MatrixField::det() const {
  if (rows != cols) throw Error("det of non-square field");
  if (rows == 0) return Scal::Constant(npts, Complex(1, 0));
  Scal d(npts);
  for (long p = 0; p < npts; ++p) d[p] = point(p).determinant();
  return d;
}

double MatrixField::max_abs() const {
  double m = 0;
  for (const auto& a : e) m = std::max(m, a.abs().maxCoeff());
  return m;
}

double MatrixField::max_imag() const {
  double m = 0;
  for (const auto& a : e) m = std::max(m, a.imag().abs().maxCoeff());
  return m;
}

double MatrixField::min_singular() const {
  double m = std::numeric_limits<double>::infinity();
  if (rows == 0 || cols == 0) return m;
  for (long p = 0; p < npts; ++p) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(point(p));
    m = std::min(m, svd.singularValues().minCoeff());
  }
  return m;
}

double MatrixField::max_condition() const {
  double m = 0;
  if (rows == 0 || cols == 0) return m;
  for (long p = 0; p < npts; ++p) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(point(p));
    const auto& s = svd.singularValues();
    const double lo = s.minCoeff();
    m = std::max(m, lo > 0 ? s.maxCoeff() / lo : std::numeric_limits<double>::infinity());
  }
  return m;
}

double MatrixField::min_eig_hermitian() const {
  double m = std::numeric_limits<double>::infinity();
  if (rows == 0) return m;
  for (long p = 0; p < npts; ++p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(point(p), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  return m;
}

MatrixField MatrixField::block(int i0, int j0, int r, int c) const {
  MatrixField f(r, c, npts);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) f.at(i, j) = at(i0 + i, j0 + j);
  return f;
}

MatrixField& MatrixField::operator+=(const MatrixField& o) {
  for (size_t i = 0; i < e.size(); ++i) e[i] += o.e[i];
  return *this;
}

MatrixField& MatrixField::operator-=(const MatrixField& o) {
  for (size_t i = 0; i < e.size(); ++i) e[i] -= o.e[i];
  return *this;
}

MatrixField& MatrixField::operator*=(Complex s) {
  for (auto& a : e) a *= s;
  return *this;
}

MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
MatrixField operator*(Complex s, MatrixField a) { return a *= s; }

MatrixField operator*(const MatrixField& a, const MatrixField& b) {
  if (a.cols != b.rows) throw RankMismatch("matrix field product shape mismatch");
  MatrixField c(a.rows, b.cols, a.npts);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      Scal s = Scal::Zero(a.npts);
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

MatrixField scale(const Scal& s, const MatrixField& a) {
  MatrixField c = a;
  for (auto& x : c.e) x *= s;
  return c;
}

MatrixField direct_sum(const MatrixField& a, const MatrixField& b) {
  MatrixField c(a.rows + b.rows, a.cols + b.cols, a.npts);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c.at(i, j) = a.at(i, j);
  for (int i = 0; i < b.rows; ++i)
    for (int j = 0; j < b.cols; ++j) c.at(a.rows + i, a.cols + j) = b.at(i, j);
  return c;
}

}  // namespace cwb
