#include "cwb/transgression.hpp"

#include <cmath>

namespace cwb {

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  // Newton iteration on P_n over [-1,1], then map to [0,1].
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    nodes[i] = 0.5 * (1.0 - x);
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = 0.5 * w;
    weights[n - 1 - i] = 0.5 * w;
  }
}

ConnectionPath ConnectionPath::linear(const Connection& a, const Connection& b, int order) {
  if (a.chart != b.chart) throw ChartMismatch("path endpoints on different charts");
  if (a.rank != b.rank) throw RankMismatch("path endpoints of different ranks");
  ConnectionPath p;
  p.chart = a.chart;
  p.rank = a.rank;
  p.quadrature_order = order;
  p.poly.push_back(a.coeff);
  p.poly.push_back(b.coeff - a.coeff);
  return p;
}

ConnectionPath ConnectionPath::curved(const Connection& a, const Connection& b, const Form& bump,
                                      int order) {
  ConnectionPath p = linear(a, b, order);
  // + t(1-t) bump = t bump - t^2 bump
  p.poly[1] += bump;
  p.poly.push_back(Complex(-1.0, 0.0) * bump);
  return p;
}

ConnectionPath ConnectionPath::from_nodes(const std::vector<Form>& nodes, int order) {
  const int m = static_cast<int>(nodes.size());
  if (m < 2 || m > 9) throw Error("from_nodes expects 2..9 node forms");
  ConnectionPath p;
  p.chart = nodes[0].chart;
  p.rank = nodes[0].rank;
  p.quadrature_order = order;
  // Solve the Vandermonde system for polynomial coefficients at
  // t_q = q/(m-1); the system is tiny and exact interpolation is wanted.
  Eigen::MatrixXd v(m, m);
  for (int q = 0; q < m; ++q) {
    const double t = static_cast<double>(q) / (m - 1);
    double tp = 1;
    for (int k = 0; k < m; ++k) {
      v(q, k) = tp;
      tp *= t;
    }
  }
  Eigen::MatrixXd vinv = v.fullPivLu().inverse();
  for (int k = 0; k < m; ++k) {
    Form ck = Form::zero(p.chart, p.rank);
    for (int q = 0; q < m; ++q) ck += Complex(vinv(k, q), 0.0) * nodes[q];
    p.poly.push_back(std::move(ck));
  }
  return p;
}

Form ConnectionPath::coeff_at(double t) const {
  Form a = Form::zero(chart, rank);
  double tp = 1;
  for (const auto& c : poly) {
    a += Complex(tp, 0.0) * c;
    tp *= t;
  }
  return a;
}

Form ConnectionPath::deriv_at(double t) const {
  Form a = Form::zero(chart, rank);
  double tp = 1;
  for (size_t k = 1; k < poly.size(); ++k) {
    a += Complex(static_cast<double>(k) * tp, 0.0) * poly[k];
    tp *= t;
  }
  return a;
}

Connection ConnectionPath::connection_at(double t) const {
  Connection c;
  c.chart = chart;
  c.rank = rank;
  c.coeff = coeff_at(t);
  return c;
}

namespace {

// exp(-F) for an ordinary curvature 2-form, exact finite series.
Form exp_neg_curvature(const Form& f, int rank, const TorusChart& chart) {
  Form acc = Form::endo(chart, 0, MatrixField::identity(rank, chart.npts()));
  Form power;
  double fact = 1;
  const int jmax = chart.dim / 2;
  for (int j = 1; j <= jmax; ++j) {
    power = (j == 1) ? f : wedge(power, f);
    fact *= j;
    form_axpy(acc, Complex(((j % 2 == 0) ? 1.0 : -1.0) / fact, 0.0), power);
  }
  return acc;
}

}  // namespace

Form cs_transgression(const ConnectionPath& p) {
  if (p.quadrature_order < 4) throw Error("quadrature order must be >= 4");
  std::vector<double> t, w;
  gauss_legendre(p.quadrature_order, t, w);
  Form acc = Form::zero(p.chart, 1);
  // The curvature along a polynomial path is polynomial in t: precompute
  // d p_k and the wedge pieces sum_{k+l=m} p_k ^ p_l once, then each node
  // is assembled by scaled adds, which keeps every evaluation aliasing-free
  // and cheap.
  const size_t np = p.poly.size();
  std::vector<Form> dpoly;
  dpoly.reserve(np);
  for (const auto& c : p.poly) dpoly.push_back(exterior_derivative(c));
  std::vector<Form> pieces(2 * np - 1, Form::zero(p.chart, p.rank));
  for (size_t k = 0; k < np; ++k)
    for (size_t l = 0; l < np; ++l)
      form_axpy(pieces[k + l], Complex(1, 0), wedge(p.poly[k], p.poly[l]));
  for (int q = 0; q < p.quadrature_order; ++q) {
    Form f = Form::zero(p.chart, p.rank);
    double tp = 1;
    for (size_t m = 0; m < pieces.size(); ++m) {
      if (m < np) form_axpy(f, Complex(tp, 0.0), dpoly[m]);
      form_axpy(f, Complex(tp, 0.0), pieces[m]);
      tp *= t[q];
    }
    Form adot = Form::zero(p.chart, p.rank);
    tp = 1;
    for (size_t k = 1; k < np; ++k) {
      form_axpy(adot, Complex(static_cast<double>(k) * tp, 0.0), p.poly[k]);
      tp *= t[q];
    }
    Form integrand = trace_form(wedge(adot, exp_neg_curvature(f, p.rank, p.chart)));
    form_axpy(acc, Complex(-w[q], 0.0), integrand);
  }
  return phi_normalize(acc);
}

Form cs_transgression(const Connection& a, const Connection& b, int order) {
  return cs_transgression(ConnectionPath::linear(a, b, order));
}

namespace {

// Pick scalar entry forms out of an End-valued form.
Form entry_form(const Form& f, int i, int j) {
  Form out = Form::zero(f.chart, 1);
  for (const auto& [s, m] : f.comp) {
    MatrixField x(1, 1, m.npts);
    x.at(0, 0) = m.at(i, j);
    out.comp.emplace(s, std::move(x));
  }
  return out;
}

// Directional derivative of the Pfaffian at entries a along direction da.
Form pfaffian_derivative(const std::vector<std::vector<Form>>& a,
                         const std::vector<std::vector<Form>>& da) {
  const size_t r = a.size();
  if (r == 2) return da[0][1];
  if (r == 4) {
    return wedge(da[0][1], a[2][3]) + wedge(a[0][1], da[2][3]) - wedge(da[0][2], a[1][3]) -
           wedge(a[0][2], da[1][3]) + wedge(da[0][3], a[1][2]) + wedge(a[0][3], da[1][2]);
  }
  throw RankMismatch("pfaffian implemented for rank 2 and 4 only");
}

void euler_entries(const Form& f, int rank, double scalefac,
                   std::vector<std::vector<Form>>& out) {
  out.assign(rank, {});
  for (int i = 0; i < rank; ++i) {
    out[i].reserve(rank);
    for (int j = 0; j < rank; ++j) out[i].push_back(Complex(scalefac, 0.0) * entry_form(f, i, j));
  }
}

}  // namespace

Form euler_transgression(const RealPath& p) {
  if (p.rank % 2 == 1) return Form::zero(p.chart, 1);
  if (p.rank > 4) throw RankMismatch("euler transgression restricted to rank <= 4");
  for (const Form* node : {&p.a0, &p.a1})
    for (const auto& [s, m] : node->comp) {
      if (m.max_imag() > 1e-8 || (m + m.transpose()).max_abs() > 1e-8)
        throw NotAntisymmetric("euler path nodes must be real antisymmetric");
    }
  std::vector<double> t, w;
  gauss_legendre(p.quadrature_order, t, w);
  const Form da0 = exterior_derivative(p.a0);
  const Form da1 = exterior_derivative(p.a1);
  Form acc = Form::zero(p.chart, 1);
  const double inv2pi = 1.0 / kTwoPi;
  for (int q = 0; q < p.quadrature_order; ++q) {
    const double s = t[q];
    Form a = Complex(1.0 - s, 0.0) * p.a0 + Complex(s, 0.0) * p.a1;
    Form adot = p.a1 - p.a0;
    Form f = Complex(1.0 - s, 0.0) * da0 + Complex(s, 0.0) * da1 + wedge(a, a);
    std::vector<std::vector<Form>> fe, de;
    euler_entries(f, p.rank, inv2pi, fe);
    euler_entries(adot, p.rank, inv2pi, de);
    acc += Complex(w[q], 0.0) * pfaffian_derivative(fe, de);
  }
  return acc;
}

Form euler_chern_wedge_transgression(const RealPath& ep, const ConnectionPath& cp) {
  if (ep.chart != cp.chart) throw ChartMismatch("paths on different charts");
  std::vector<double> t, w;
  gauss_legendre(std::max(ep.quadrature_order, cp.quadrature_order), t, w);
  const Form da0 = exterior_derivative(ep.a0);
  const Form da1 = exterior_derivative(ep.a1);
  std::vector<Form> dpoly;
  for (const auto& c : cp.poly) dpoly.push_back(exterior_derivative(c));
  Form acc = Form::zero(ep.chart, 1);
  const double inv2pi = 1.0 / kTwoPi;
  for (size_t q = 0; q < t.size(); ++q) {
    const double s = t[q];
    // Euler factor pieces at time s
    Form ae = Complex(1.0 - s, 0.0) * ep.a0 + Complex(s, 0.0) * ep.a1;
    Form fe = Complex(1.0 - s, 0.0) * da0 + Complex(s, 0.0) * da1 + wedge(ae, ae);
    std::vector<std::vector<Form>> fent, dent;
    euler_entries(fe, ep.rank, inv2pi, fent);
    euler_entries(ep.a1 - ep.a0, ep.rank, inv2pi, dent);
    Form e_s = pfaffian(fent);
    Form de_s = pfaffian_derivative(fent, dent);
    // Chern factor pieces at time s
    Form ac = cp.coeff_at(s);
    Form dac = Form::zero(cp.chart, cp.rank);
    double tp = 1;
    for (const auto& dc : dpoly) {
      dac += Complex(tp, 0.0) * dc;
      tp *= s;
    }
    Form fc = dac + wedge(ac, ac);
    Form expf = exp_neg_curvature(fc, cp.rank, cp.chart);
    Form ch_s = phi_normalize(trace_form(expf));
    Form chdot_s =
        Complex(-1.0, 0.0) * phi_normalize(trace_form(wedge(cp.deriv_at(s), expf)));
    // dt-part of e(tilde nabla) ^ ch(tilde nabla); both factors even degree
    acc += Complex(w[q], 0.0) * (wedge(de_s, ch_s) + wedge(e_s, chdot_s));
  }
  return acc;
}

Form nadel_flat_closed_form(const Form& omega) {
  for (const auto& [s, m] : omega.comp)
    if (subset_size(s) != 1 && m.max_abs() > 0)
      throw Error("nadel closed form expects an End-valued 1-form");
  const int dim = omega.chart.dim;
  Form acc = Form::zero(omega.chart, 1);
  Form power = omega;  // omega^{2r-1}
  Form omega2 = wedge(omega, omega);
  double num = 1;    // (r-1)!
  double den = 1;    // (2r-1)!
  Complex twopii_r(1.0, 0.0);
  const int rmax = (dim + 1) / 2;
  for (int r = 1; r <= rmax; ++r) {
    if (r > 1) {
      power = wedge(power, omega2);
      num *= (r - 1);
      den *= (2.0 * r - 2.0) * (2.0 * r - 1.0);
    }
    twopii_r *= Complex(0.0, kTwoPi);
    acc += Complex(-num / den, 0.0) * (Complex(1.0, 0.0) / twopii_r) * trace_form(power);
  }
  return acc;
}

FormClass nadel_class(const Connection& e, const Connection& f_conn, const MatrixField& f) {
  if (!is_flat(e)) throw NotFlat("nadel class: E connection not flat");
  if (!is_flat(f_conn)) throw NotFlat("nadel class: F connection not flat");
  if (f.min_singular() < 1e-10) throw NotInvertible("nadel class: f not invertible");
  Connection pulled = pullback(f_conn, f);
  Form t = cs_transgression(e, pulled);
  return cohomology_class(t);
}

Form conjugation_transgression(const Connection& c) {
  Connection adj = adjoint_connection(c);
  return cs_transgression(adj, c);
}

}  // namespace cwb
