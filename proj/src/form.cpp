#include "cwb/form.hpp"

#include <bit>

namespace cwb {

int subset_size(Subset s) { return std::popcount(static_cast<unsigned>(s)); }

int shuffle_sign(Subset s, Subset t) {
  int inv = 0;
  for (int b = 0; b < 8; ++b)
    if (t & (1u << b)) {
      // bits of s strictly greater than b
      inv += std::popcount(static_cast<unsigned>(s) >> (b + 1));
    }
  return (inv % 2 == 0) ? 1 : -1;
}

int insertion_sign(int axis, Subset s) {
  const unsigned below = static_cast<unsigned>(s) & ((1u << axis) - 1u);
  return (std::popcount(below) % 2 == 0) ? 1 : -1;
}

Form Form::zero(const TorusChart& c, int rank) {
  Form f;
  f.chart = c;
  f.rank = rank;
  return f;
}

Form Form::scalar(const TorusChart& c, const Scal& values) {
  Form f = zero(c, 1);
  MatrixField m(1, 1, c.npts());
  m.at(0, 0) = values;
  f.comp.emplace(Subset{0}, std::move(m));
  return f;
}

Form Form::endo(const TorusChart& c, Subset s, const MatrixField& m) {
  Form f = zero(c, m.rows);
  if (m.rows != m.cols) throw RankMismatch("form coefficients must be square");
  f.comp.emplace(s, m);
  return f;
}

Form Form::coordinate_one_form(const TorusChart& c, int axis) {
  Form f = zero(c, 1);
  MatrixField m(1, 1, c.npts());
  m.at(0, 0) = Scal::Constant(c.npts(), Complex(1.0, 0.0));
  f.comp.emplace(static_cast<Subset>(1u << axis), std::move(m));
  return f;
}

const MatrixField& Form::at(Subset s) const {
  auto it = comp.find(s);
  if (it == comp.end()) throw Error("form component absent");
  return it->second;
}

MatrixField Form::get(Subset s) const {
  auto it = comp.find(s);
  if (it != comp.end()) return it->second;
  return MatrixField(rank, rank, chart.npts());
}

int Form::max_degree() const {
  int d = 0;
  for (const auto& [s, m] : comp) d = std::max(d, subset_size(s));
  return d;
}

Form Form::degree_part(int k) const {
  Form f = zero(chart, rank);
  for (const auto& [s, m] : comp)
    if (subset_size(s) == k) f.comp.emplace(s, m);
  return f;
}

bool Form::is_zero(double tol) const {
  for (const auto& [s, m] : comp)
    if (m.max_abs() > tol) return false;
  return true;
}

Form& Form::operator+=(const Form& o) {
  if (chart != o.chart) throw ChartMismatch("form addition across charts");
  if (rank != o.rank) throw RankMismatch("form addition across ranks");
  for (const auto& [s, m] : o.comp) {
    auto it = comp.find(s);
    if (it == comp.end())
      comp.emplace(s, m);
    else
      it->second += m;
  }
  return *this;
}

Form& Form::operator-=(const Form& o) {
  Form neg = o;
  neg *= Complex(-1.0, 0.0);
  return *this += neg;
}

Form& Form::operator*=(Complex s) {
  for (auto& [k, m] : comp) m *= s;
  return *this;
}

Form operator+(Form a, const Form& b) { return a += b; }
Form operator-(Form a, const Form& b) { return a -= b; }
Form operator*(Complex s, Form a) { return a *= s; }

void form_axpy(Form& y, Complex alpha, const Form& x) {
  if (y.chart != x.chart || y.rank != x.rank) throw ChartMismatch("axpy shape mismatch");
  for (const auto& [s, m] : x.comp) {
    auto it = y.comp.find(s);
    if (it == y.comp.end()) {
      MatrixField scaled = m;
      scaled *= alpha;
      y.comp.emplace(s, std::move(scaled));
    } else {
      for (size_t i = 0; i < m.e.size(); ++i) it->second.e[i] += alpha * m.e[i];
    }
  }
}

namespace {

// Lift a scalar (1x1) coefficient to act on an r x r one.
MatrixField lift_mul(const MatrixField& a, const MatrixField& b) {
  if (a.rows == 1 && b.rows != 1) {
    MatrixField c = b;
    for (auto& x : c.e) x *= a.at(0, 0);
    return c;
  }
  if (b.rows == 1 && a.rows != 1) {
    MatrixField c = a;
    for (auto& x : c.e) x *= b.at(0, 0);
    return c;
  }
  return a * b;
}

}  // namespace

Form wedge(const Form& a, const Form& b) {
  if (a.chart != b.chart) throw ChartMismatch("wedge across charts");
  if (a.rank != b.rank && a.rank != 1 && b.rank != 1)
    throw RankMismatch("wedge rank mismatch");
  Form f = Form::zero(a.chart, std::max(a.rank, b.rank));
  for (const auto& [s, ma] : a.comp)
    for (const auto& [t, mb] : b.comp) {
      if (s & t) continue;
      const int sgn = shuffle_sign(s, t);
      MatrixField prod = lift_mul(ma, mb);
      if (sgn < 0) prod *= Complex(-1.0, 0.0);
      const Subset st = s | t;
      auto it = f.comp.find(st);
      if (it == f.comp.end())
        f.comp.emplace(st, std::move(prod));
      else
        it->second += prod;
    }
  return f;
}

namespace {

// Split an End coefficient into block-diagonal (even) and off-diagonal
// (odd) parts for the grading C^split + C^(r-split).
void grade_split(const MatrixField& m, int split, MatrixField& even, MatrixField& odd) {
  even = MatrixField(m.rows, m.cols, m.npts);
  odd = MatrixField(m.rows, m.cols, m.npts);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) {
      const bool diag = (i < split) == (j < split);
      (diag ? even : odd).at(i, j) = m.at(i, j);
    }
}

}  // namespace

Form super_wedge(const Form& a, const Form& b, int split) {
  if (a.chart != b.chart) throw ChartMismatch("super_wedge across charts");
  if (a.rank != b.rank) throw RankMismatch("super_wedge rank mismatch");
  if (split <= 0 || split >= a.rank) throw RankMismatch("split out of range");
  Form f = Form::zero(a.chart, a.rank);
  for (const auto& [s, ma] : a.comp) {
    MatrixField even, odd;
    grade_split(ma, split, even, odd);
    for (const auto& [t, mb] : b.comp) {
      if (s & t) continue;
      const int q = subset_size(t);
      const int sgn = shuffle_sign(s, t);
      // (alpha ox a)(beta ox b) = (-1)^{deg a deg beta} (alpha^beta) ox (ab)
      MatrixField prod = even * mb;
      MatrixField oddprod = odd * mb;
      if (q % 2 == 1)
        prod -= oddprod;
      else
        prod += oddprod;
      if (sgn < 0) prod *= Complex(-1.0, 0.0);
      const Subset st = s | t;
      auto it = f.comp.find(st);
      if (it == f.comp.end())
        f.comp.emplace(st, std::move(prod));
      else
        it->second += prod;
    }
  }
  return f;
}

Form super_commutator(const Form& a, int par_a, const Form& b, int par_b, int split) {
  Form ab = super_wedge(a, b, split);
  Form ba = super_wedge(b, a, split);
  if ((par_a * par_b) % 2 == 1) return ab + ba;
  return ab - ba;
}

Form exterior_derivative(const Form& a) {
  Form f = Form::zero(a.chart, a.rank);
  for (const auto& [s, m] : a.comp) {
    for (int axis = 0; axis < a.chart.dim; ++axis) {
      if (s & (1u << axis)) continue;
      const int sgn = insertion_sign(axis, s);
      MatrixField dm(m.rows, m.cols, m.npts);
      for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
          dm.at(i, j) = spectral_derivative(a.chart, m.at(i, j), axis);
      if (sgn < 0) dm *= Complex(-1.0, 0.0);
      const Subset st = s | static_cast<Subset>(1u << axis);
      auto it = f.comp.find(st);
      if (it == f.comp.end())
        f.comp.emplace(st, std::move(dm));
      else
        it->second += dm;
    }
  }
  return f;
}

Form trace_form(const Form& a) {
  Form f = Form::zero(a.chart, 1);
  for (const auto& [s, m] : a.comp) {
    MatrixField t(1, 1, m.npts);
    t.at(0, 0) = m.trace();
    f.comp.emplace(s, std::move(t));
  }
  return f;
}

Form supertrace_form(const Form& a, int split) {
  if (split <= 0 || split >= a.rank) throw RankMismatch("split out of range");
  Form f = Form::zero(a.chart, 1);
  for (const auto& [s, m] : a.comp) {
    Scal t = Scal::Zero(m.npts);
    for (int i = 0; i < split; ++i) t += m.at(i, i);
    for (int i = split; i < a.rank; ++i) t -= m.at(i, i);
    MatrixField tf(1, 1, m.npts);
    tf.at(0, 0) = t;
    f.comp.emplace(s, std::move(tf));
  }
  return f;
}

namespace {

Complex phi_factor(int degree) {
  // divide degree 2k and 2k-1 by (2 pi i)^k
  const int k = (degree + 1) / 2;
  Complex f(1.0, 0.0);
  for (int i = 0; i < k; ++i) f *= Complex(0.0, kTwoPi);
  return Complex(1.0, 0.0) / f;
}

double factorial(int k) {
  double f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

Form phi_normalize(const Form& a) {
  Form f = a;
  for (auto& [s, m] : f.comp) m *= phi_factor(subset_size(s));
  return f;
}

Form phi_cap(const Form& a) {
  Form f = a;
  for (auto& [s, m] : f.comp) m *= Complex(factorial((subset_size(s) + 1) / 2), 0.0);
  return f;
}

Form special_adjoint(const Form& a, int split) {
  Form f = Form::zero(a.chart, a.rank);
  for (const auto& [s, m] : a.comp) {
    const int p = subset_size(s);
    MatrixField even, odd;
    grade_split(m, split, even, odd);
    MatrixField adj = even.adjoint();
    MatrixField adjodd = odd.adjoint();
    if (p % 2 == 1)
      adj -= adjodd;
    else
      adj += adjodd;
    if (((p * (p + 1)) / 2) % 2 == 1) adj *= Complex(-1.0, 0.0);
    f.comp.emplace(s, std::move(adj));
  }
  return f;
}

Form conj(const Form& a) {
  Form f = a;
  for (auto& [s, m] : f.comp) m = m.conjugate();
  return f;
}

Form adjoint_form(const Form& a) {
  Form f = a;
  for (auto& [s, m] : f.comp) m = m.adjoint();
  return f;
}

Complex integrate_top(const Form& a) {
  Subset top = 0;
  for (int axis = 0; axis < a.chart.dim; ++axis) top |= static_cast<Subset>(1u << axis);
  auto it = a.comp.find(top);
  if (it == a.comp.end()) return Complex(0.0, 0.0);
  if (it->second.rows != 1) throw RankMismatch("integrate_top needs a scalar form");
  return grid_integral(a.chart, it->second.at(0, 0));
}

double linf(const Form& a) {
  double m = 0;
  for (const auto& [s, f] : a.comp) m = std::max(m, f.max_abs());
  return m;
}

Form form_direct_sum(const Form& a, const Form& b) {
  if (a.chart != b.chart) throw ChartMismatch("direct sum across charts");
  Form f = Form::zero(a.chart, a.rank + b.rank);
  std::map<Subset, bool> keys;
  for (const auto& [s, m] : a.comp) keys[s] = true;
  for (const auto& [s, m] : b.comp) keys[s] = true;
  for (const auto& [s, unused] : keys)
    f.comp.emplace(s, direct_sum(a.get(s), b.get(s)));
  return f;
}

Eigen::MatrixXcd FormClass::period(Subset s, int rank_hint) const {
  auto it = periods.find(s);
  if (it != periods.end()) return it->second;
  const int r = rank_hint > 0 ? rank_hint : rank;
  return Eigen::MatrixXcd::Zero(r, r);
}

FormClass& FormClass::operator+=(const FormClass& o) {
  for (const auto& [s, m] : o.periods) {
    auto it = periods.find(s);
    if (it == periods.end())
      periods.emplace(s, m);
    else
      it->second += m;
  }
  return *this;
}

FormClass& FormClass::operator-=(const FormClass& o) {
  for (const auto& [s, m] : o.periods) {
    auto it = periods.find(s);
    if (it == periods.end())
      periods.emplace(s, -m);
    else
      it->second -= m;
  }
  return *this;
}

FormClass& FormClass::operator*=(Complex s) {
  for (auto& [k, m] : periods) m *= s;
  return *this;
}

FormClass operator+(FormClass a, const FormClass& b) { return a += b; }
FormClass operator-(FormClass a, const FormClass& b) { return a -= b; }
FormClass operator*(Complex s, FormClass a) { return a *= s; }

FormClass conj(const FormClass& c) {
  FormClass f = c;
  for (auto& [s, m] : f.periods) m = m.conjugate();
  return f;
}

double class_norm(const FormClass& c) {
  double n = 0;
  for (const auto& [s, m] : c.periods) n = std::max(n, m.cwiseAbs().maxCoeff());
  return n;
}

double class_distance(const FormClass& a, const FormClass& b) {
  FormClass d = a;
  d -= b;
  return class_norm(d);
}

double class_real_norm(const FormClass& c) {
  double n = 0;
  for (const auto& [s, m] : c.periods) n = std::max(n, m.real().cwiseAbs().maxCoeff());
  return n;
}

double class_norm_degree(const FormClass& c, int degree) {
  double n = 0;
  for (const auto& [s, m] : c.periods)
    if (subset_size(s) == degree) n = std::max(n, m.cwiseAbs().maxCoeff());
  return n;
}

FormClass raw_periods(const Form& a) {
  FormClass c;
  c.rank = a.rank;
  for (const auto& [s, m] : a.comp) {
    Eigen::MatrixXcd p(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) p(i, j) = grid_mean(m.at(i, j));
    c.periods.emplace(s, std::move(p));
  }
  return c;
}

FormClass cohomology_class(const Form& a) {
  const double tol = 1e-8 * (1.0 + linf(a));
  const double resid = linf(exterior_derivative(a));
  if (resid > tol) throw NotClosed("cohomology_class of a non-closed form");
  return raw_periods(a);
}

}  // namespace cwb
