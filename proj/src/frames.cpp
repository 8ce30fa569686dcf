#include "cwb/frames.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace cwb {

MatrixField FrameField::as_field() const {
  MatrixField m(N, r, static_cast<long>(F.size()));
  for (long p = 0; p < static_cast<long>(F.size()); ++p) m.set_point(p, F[p]);
  return m;
}

double FrameField::max_jump() const {
  double m = 0;
  for (int axis = 0; axis < chart.dim; ++axis) {
    const long s = chart.stride(axis);
    const int na = chart.n[axis];
    for (long p = 0; p < chart.npts(); ++p) {
      const long j = (p / s) % na;
      const long q = (j + 1 < na) ? p + s : p - s * (na - 1);
      m = std::max(m, (F[q] - F[p]).cwiseAbs().maxCoeff());
    }
  }
  return m;
}

Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& x) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(x);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(x.rows(), x.cols());
  Eigen::MatrixXcd r = q.adjoint() * x;
  // fix phases so the diagonal of R is positive (continuity of the sweep)
  for (int j = 0; j < x.cols(); ++j) {
    const Complex d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

Eigen::MatrixXcd unitary_part_of(const Eigen::MatrixXcd& w) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

Eigen::MatrixXcd unitary_log(const Eigen::MatrixXcd& w) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(w);
  Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::VectorXcd loglam(lam.size());
  for (int i = 0; i < lam.size(); ++i) loglam[i] = std::log(lam[i]);
  return v * loglam.asDiagonal() * v.inverse();
}

Eigen::MatrixXcd kernel_basis(const Eigen::MatrixXcd& m, double rel_tol, int expected_dim) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  const double thr = rel_tol * std::max(smax, 1.0);
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > thr) ++rank;
  const int kdim = static_cast<int>(m.cols()) - rank;
  if (expected_dim >= 0 && kdim != expected_dim)
    throw RankJump("kernel dimension jumped over the grid");
  return svd.matrixV().rightCols(kdim);
}

Eigen::MatrixXcd low_eigenvectors(const Eigen::MatrixXcd& h, double cutoff, double* gap_out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const auto& lam = es.eigenvalues();
  int lo = 0, hi = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < lam.size(); ++i) {
    if (std::abs(lam[i]) < cutoff)
      ++hi;
    else if (lam[i] < 0)
      ++lo, ++hi;
  }
  for (int i = 0; i < lam.size(); ++i)
    if (std::abs(lam[i]) >= cutoff) gap = std::min(gap, std::abs(lam[i]));
  if (gap_out) *gap_out = gap;
  return es.eigenvectors().middleCols(lo, hi - lo);
}

namespace {

// Align frame `next_raw` to `prev` by projection and re-orthonormalization.
Eigen::MatrixXcd align_to(const Eigen::MatrixXcd& prev, const Eigen::MatrixXcd& next_raw) {
  // project prev into span(next_raw): P_next * prev
  Eigen::MatrixXcd x = next_raw * (next_raw.adjoint() * prev);
  return orthonormalize(x);
}

// Divide the wrap holonomy out of a closed 1D chain of frames.
void divide_holonomy(std::vector<Eigen::MatrixXcd*>& chain) {
  const int L = static_cast<int>(chain.size());
  if (L == 0 || chain[0]->cols() == 0) return;
  // holonomy: transport frame L-1 one more step onto frame 0's span
  Eigen::MatrixXcd wrapped = align_to(*chain[L - 1], *chain[0]);
  Eigen::MatrixXcd w = chain[0]->adjoint() * wrapped;  // wrapped = F_0 * w
  Eigen::MatrixXcd logw = unitary_log(unitary_part_of(w));
  // F_j <- F_j exp(-(j/L) log w) closes the chain periodically
  for (int j = 1; j < L; ++j) {
    Eigen::MatrixXcd g = (-static_cast<double>(j) / L * logw).exp();
    *chain[j] = *chain[j] * g;
  }
}

}  // namespace

FrameField smooth_frames(const TorusChart& chart, const std::vector<Eigen::MatrixXcd>& raw) {
  if (chart.dim > 2) throw Error("smooth frames support chart dim <= 2");
  FrameField out;
  out.chart = chart;
  out.F = raw;
  out.N = raw.empty() ? 0 : static_cast<int>(raw[0].rows());
  out.r = raw.empty() ? 0 : static_cast<int>(raw[0].cols());
  if (out.r == 0) return out;
  const int n0 = chart.n[0];
  // sweep along axis 0 at row 0
  for (int j = 1; j < n0; ++j) out.F[j] = align_to(out.F[j - 1], out.F[j]);
  {
    std::vector<Eigen::MatrixXcd*> chain;
    for (int j = 0; j < n0; ++j) chain.push_back(&out.F[j]);
    divide_holonomy(chain);
  }
  if (chart.dim == 2) {
    const int n1 = chart.n[1];
    const long s1 = chart.stride(1);
    for (int i = 0; i < n0; ++i) {
      for (int j = 1; j < n1; ++j)
        out.F[i + j * s1] = align_to(out.F[i + (j - 1) * s1], out.F[i + j * s1]);
      std::vector<Eigen::MatrixXcd*> chain;
      for (int j = 0; j < n1; ++j) chain.push_back(&out.F[i + j * s1]);
      divide_holonomy(chain);
    }
  }
  return out;
}

std::vector<Eigen::MatrixXcd> sweep_frames(const std::vector<Eigen::MatrixXcd>& raw) {
  std::vector<Eigen::MatrixXcd> f = raw;
  for (size_t j = 1; j < f.size(); ++j) f[j] = align_to(f[j - 1], f[j]);
  return f;
}

Eigen::MatrixXcd ordered_transport(const std::vector<Eigen::MatrixXcd>& frames) {
  if (frames.empty()) return {};
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Identity(frames[0].cols(), frames[0].cols());
  for (size_t j = 1; j < frames.size(); ++j) t = (frames[j].adjoint() * frames[j - 1]) * t;
  return t;
}

}  // namespace cwb
