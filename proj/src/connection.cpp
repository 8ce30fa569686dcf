#include "cwb/connection.hpp"

namespace cwb {

Connection Connection::trivial(const TorusChart& c, int rank) {
  Connection k;
  k.chart = c;
  k.rank = rank;
  k.coeff = Form::zero(c, rank);
  return k;
}

Connection Connection::make(const TorusChart& c, const Form& coeff,
                            std::optional<MatrixField> metric) {
  Connection k;
  k.chart = c;
  k.rank = coeff.rank;
  for (const auto& [s, m] : coeff.comp)
    if (subset_size(s) != 1) throw Error("connection coefficient must be a 1-form");
  k.coeff = coeff;
  if (metric) {
    if (metric->rows != k.rank) throw RankMismatch("metric rank mismatch");
    if (metric->min_eig_hermitian() <= 0.0)
      throw Error("metric must be positive definite");
    k.metric = std::move(metric);
  }
  return k;
}

const MatrixField& Connection::require_metric() const {
  if (!metric) throw MissingMetric("operation requires a hermitian metric");
  return *metric;
}

Connection Connection::with_metric(const MatrixField& h) const {
  Connection c = *this;
  c.metric = h;
  return c;
}

Connection Connection::with_identity_metric() const {
  return with_metric(MatrixField::identity(rank, chart.npts()));
}

Form curvature(const Connection& c) {
  return exterior_derivative(c.coeff) + wedge(c.coeff, c.coeff);
}

double flatness_residual(const Connection& c) { return linf(curvature(c)); }

bool is_flat(const Connection& c) {
  const double a = linf(c.coeff);
  return flatness_residual(c) < 1e-8 * (1.0 + a * a);
}

double metric_compat_residual(const Connection& c) {
  const MatrixField& h = c.require_metric();
  Form hform = Form::endo(c.chart, 0, h);
  Form dh = exterior_derivative(hform);
  Form rhs = wedge(adjoint_form(c.coeff), hform) + wedge(hform, c.coeff);
  return linf(dh - rhs);
}

Form chern_character(const Connection& c) {
  const Form f = curvature(c);
  // exp(-F) as the exact finite series; F^j has degree 2j
  Form acc = Form::endo(c.chart, 0, MatrixField::identity(c.rank, c.chart.npts()));
  Form power;
  double fact = 1;
  const int jmax = c.chart.dim / 2;
  for (int j = 1; j <= jmax; ++j) {
    power = (j == 1) ? f : wedge(power, f);
    fact *= j;
    form_axpy(acc, Complex(((j % 2 == 0) ? 1.0 : -1.0) / fact, 0.0), power);
  }
  return phi_normalize(trace_form(acc));
}

Connection adjoint_connection(const Connection& c) {
  const MatrixField& h = c.require_metric();
  const MatrixField hinv = h.inverse();
  Form hform = Form::endo(c.chart, 0, h);
  Form dh = exterior_derivative(hform);
  Form hinvf = Form::endo(c.chart, 0, hinv);
  Form astar = wedge(hinvf, dh) - wedge(hinvf, wedge(adjoint_form(c.coeff), hform));
  Connection out;
  out.chart = c.chart;
  out.rank = c.rank;
  out.coeff = astar;
  out.metric = c.metric;
  return out;
}

Connection unitary_part(const Connection& c) {
  Connection adj = adjoint_connection(c);
  Connection out = c;
  out.coeff = Complex(0.5, 0.0) * (c.coeff + adj.coeff);
  return out;
}

Connection direct_sum(const Connection& a, const Connection& b) {
  if (a.chart != b.chart) throw ChartMismatch("direct sum across charts");
  Connection c;
  c.chart = a.chart;
  c.rank = a.rank + b.rank;
  c.coeff = form_direct_sum(a.coeff, b.coeff);
  if (a.metric || b.metric) {
    const MatrixField ha = a.metric ? *a.metric : MatrixField::identity(a.rank, a.chart.npts());
    const MatrixField hb = b.metric ? *b.metric : MatrixField::identity(b.rank, b.chart.npts());
    c.metric = direct_sum(ha, hb);
  }
  return c;
}

Connection pullback(const Connection& c, const MatrixField& g) {
  if (g.rows != c.rank) throw RankMismatch("pullback rank mismatch");
  const MatrixField ginv = g.inverse();
  Form gform = Form::endo(c.chart, 0, g);
  Form ginvf = Form::endo(c.chart, 0, ginv);
  Form dg = exterior_derivative(gform);
  Connection out;
  out.chart = c.chart;
  out.rank = c.rank;
  out.coeff = wedge(ginvf, dg) + wedge(ginvf, wedge(c.coeff, gform));
  if (c.metric) {
    // pulled-back metric g^dagger h g keeps adjoints consistent
    out.metric = g.adjoint() * (*c.metric) * g;
  }
  return out;
}

Superconnection Superconnection::make(int rplus, int rminus, const Connection& even,
                                      const Form& odd) {
  Superconnection a;
  a.rank_plus = rplus;
  a.rank_minus = rminus;
  if (even.rank != rplus + rminus) throw RankMismatch("even part rank mismatch");
  a.even_part = even;
  // even part must be block diagonal
  for (const auto& [s, m] : even.coeff.comp) {
    MatrixField off = m;
    for (int i = 0; i < rplus; ++i)
      for (int j = 0; j < rplus; ++j) off.at(i, j) = Scal::Zero(m.npts);
    for (int i = rplus; i < even.rank; ++i)
      for (int j = rplus; j < even.rank; ++j) off.at(i, j) = Scal::Zero(m.npts);
    if (off.max_abs() > 0) throw Error("superconnection even part must be block diagonal");
  }
  if (odd.rank != rplus + rminus) throw RankMismatch("odd form rank mismatch");
  // odd form must be globally odd: diagonal blocks in odd form degree,
  // off-diagonal blocks in even form degree
  for (const auto& [s, m] : odd.comp) {
    const int p = subset_size(s);
    for (int i = 0; i < even.rank; ++i)
      for (int j = 0; j < even.rank; ++j) {
        const bool diag = (i < rplus) == (j < rplus);
        const bool allowed = diag ? (p % 2 == 1) : (p % 2 == 0);
        if (!allowed && m.at(i, j).abs().maxCoeff() > 0)
          throw Error("superconnection odd form must be globally odd");
      }
  }
  a.odd_form = odd;
  return a;
}

Form curvature_super(const Superconnection& a) {
  Form total = a.even_part.coeff + a.odd_form;
  return exterior_derivative(total) + super_wedge(total, total, a.split());
}

namespace {

// exp(-F) in the graded algebra by scaling and squaring; needed because F
// may carry an invertible degree-0 block (from omega^2).
Form super_exp_neg(const Form& f, int split) {
  double norm = linf(f);
  int m = 0;
  while (norm > 0.5 && m < 40) {
    norm *= 0.5;
    ++m;
  }
  const double scale = std::ldexp(1.0, -m);
  Form x = Complex(-scale, 0.0) * f;
  Form acc = Form::endo(f.chart, 0, MatrixField::identity(f.rank, f.chart.npts()));
  Form power = acc;
  double fact = 1;
  for (int j = 1; j <= 16; ++j) {
    power = super_wedge(power, x, split);
    fact *= j;
    Form term = Complex(1.0 / fact, 0.0) * power;
    acc += term;
    if (linf(term) < 1e-18) break;
  }
  for (int i = 0; i < m; ++i) acc = super_wedge(acc, acc, split);
  return acc;
}

}  // namespace

Form chern_character_super(const Superconnection& a) {
  Form f = curvature_super(a);
  Form expf = super_exp_neg(f, a.split());
  return phi_normalize(supertrace_form(expf, a.split()));
}

Superconnection adjoint_super(const Superconnection& a) {
  Connection even = a.even_part;
  if (!even.metric) even = even.with_identity_metric();
  Superconnection out;
  out.rank_plus = a.rank_plus;
  out.rank_minus = a.rank_minus;
  out.even_part = adjoint_connection(even);
  out.odd_form = special_adjoint(a.odd_form, a.split());
  return out;
}

RealBundleConnection RealBundleConnection::make(const Connection& c) {
  RealBundleConnection r;
  double im = 0;
  for (const auto& [s, m] : c.coeff.comp) im = std::max(im, m.max_imag());
  if (c.metric) im = std::max(im, c.metric->max_imag());
  if (im > 1e-12) throw Error("real bundle connection has imaginary parts");
  r.conn = c;
  if (!r.conn.metric) r.conn = r.conn.with_identity_metric();
  return r;
}

Form pfaffian(const std::vector<std::vector<Form>>& a) {
  const size_t r = a.size();
  if (r == 2) return a[0][1];
  if (r == 4) {
    return wedge(a[0][1], a[2][3]) - wedge(a[0][2], a[1][3]) + wedge(a[0][3], a[1][2]);
  }
  throw RankMismatch("pfaffian implemented for rank 2 and 4 only");
}

Form euler_form(const RealBundleConnection& c) {
  const int r = c.conn.rank;
  if (r > 4) throw RankMismatch("euler form restricted to rank <= 4");
  if (r % 2 == 1) return Form::zero(c.conn.chart, 1);
  Form f = curvature(c.conn);
  // Pfaffian is taken in the given trivialization, so the frame must be
  // orthonormal for the euclidean metric
  const MatrixField& h = c.conn.require_metric();
  MatrixField hdev = h - MatrixField::identity(r, h.npts);
  if (hdev.max_abs() > 1e-12)
    throw Error("euler form expects an orthonormal trivialization (identity metric)");
  Form hf = wedge(Form::endo(c.conn.chart, 0, h), f);
  double asym = 0;
  for (const auto& [s, m] : hf.comp) asym = std::max(asym, (m + m.transpose()).max_abs());
  if (asym > 1e-8) throw NotAntisymmetric("curvature not metric-antisymmetric");
  std::vector<std::vector<Form>> entries(r);
  const Complex inv2pi(1.0 / kTwoPi, 0.0);
  for (int i = 0; i < r; ++i) {
    entries[i].reserve(r);
    for (int j = 0; j < r; ++j) {
      Form fij = Form::zero(c.conn.chart, 1);
      for (const auto& [s, m] : f.comp) {
        MatrixField x(1, 1, m.npts);
        x.at(0, 0) = m.at(i, j);
        fij.comp.emplace(s, std::move(x));
      }
      entries[i].push_back(inv2pi * fij);
    }
  }
  return pfaffian(entries);
}

}  // namespace cwb
