#include "cwb/kclasses.hpp"

namespace cwb {

RelKGenerator RelKGenerator::make(const Connection& e, const Connection& f_conn,
                                  const MatrixField& f, int sign) {
  if (e.chart != f_conn.chart) throw ChartMismatch("relative generator across charts");
  if (e.rank != f_conn.rank || f.rows != e.rank || f.cols != e.rank)
    throw RankMismatch("relative generator rank mismatch");
  if (!is_flat(e) || !is_flat(f_conn)) throw NotFlat("relative generator needs flat connections");
  if (f.min_singular() < 1e-10) throw NotInvertible("relative generator map not invertible");
  RelKGenerator g;
  g.e = e;
  g.f_conn = f_conn;
  g.f = f;
  g.sign = sign;
  return g;
}

FreeMultGenerator FreeMultGenerator::make(const Connection& e, const Form& alpha, int sign) {
  if (alpha.chart != e.chart) throw ChartMismatch("generator form on wrong chart");
  for (const auto& [s, m] : alpha.comp)
    if (subset_size(s) % 2 == 0 && m.max_abs() > 0)
      throw Error("alpha must have odd-degree components only");
  FreeMultGenerator g;
  g.e = e;
  g.alpha = alpha;
  g.sign = sign;
  return g;
}

FormClass nadel_class(const RelKGenerator& g) {
  FormClass c = nadel_class(g.e, g.f_conn, g.f);
  if (g.sign < 0) c *= Complex(-1.0, 0.0);
  return c;
}

RelKGenerator direct_sum(const RelKGenerator& a, const RelKGenerator& b) {
  if (a.sign != b.sign) throw Error("direct sum of generators with opposite signs");
  return RelKGenerator::make(direct_sum(a.e, b.e), direct_sum(a.f_conn, b.f_conn),
                             direct_sum(a.f, b.f), a.sign);
}

Form chern_hat(const FreeMultGenerator& g) {
  Form ch = chern_character(g.e);
  Form da = exterior_derivative(g.alpha);
  Form out = ch - da;
  if (g.sign < 0) out *= Complex(-1.0, 0.0);
  return out;
}

FreeMultGenerator normalize_change_connection(const FreeMultGenerator& g,
                                              const Connection& new_conn) {
  if (new_conn.rank != g.e.rank || new_conn.chart != g.e.chart)
    throw RankMismatch("connection change across bundles");
  Form shift = cs_transgression(g.e, new_conn);
  FreeMultGenerator out = g;
  out.e = new_conn;
  out.alpha = g.alpha + shift;
  return out;
}

FormClass borel_class(const FreeMultGenerator& g) {
  Connection e = g.e.metric ? g.e : g.e.with_identity_metric();
  Form b = conjugation_transgression(e) - g.alpha + conj(g.alpha);
  // Borel class lives in odd forms modulo exact forms; it is closed only
  // when ch-hat is real, so reduce by periods without the closedness gate.
  FormClass c = raw_periods(b);
  if (g.sign < 0) c *= Complex(-1.0, 0.0);
  return c;
}

RelKGenerator conjugate_relk(const RelKGenerator& g) {
  Connection e = g.e.metric ? g.e : g.e.with_identity_metric();
  Connection f = g.f_conn.metric ? g.f_conn : g.f_conn.with_identity_metric();
  return RelKGenerator::make(adjoint_connection(e), adjoint_connection(f), g.f, g.sign);
}

bool is_multiplicative(const FreeMultGenerator& g, double tol) {
  Form resid = exterior_derivative(g.alpha) - chern_character(g.e);
  MatrixField r(1, 1, g.e.chart.npts());
  r.at(0, 0) = Scal::Constant(g.e.chart.npts(), Complex(g.e.rank, 0.0));
  resid += Form::endo(g.e.chart, 0, r);
  return class_norm(raw_periods(resid)) < tol;
}

double IntegralityReport::max_distance() const {
  double m = 0;
  for (const auto& e : entries) m = std::max(m, e.nearest_integer_distance);
  return m;
}

IntegralityReport phi_integrality_report(const FormClass& c) {
  IntegralityReport rep;
  for (const auto& [s, m] : c.periods) {
    if (m.rows() != 1) throw RankMismatch("integrality report expects scalar classes");
    const int k = (subset_size(s) + 1) / 2;
    double fact = 1;
    for (int i = 2; i <= k; ++i) fact *= i;
    const Complex scaled = m(0, 0) * fact;
    const double dist = std::hypot(scaled.real() - std::round(scaled.real()), scaled.imag());
    rep.entries.push_back({s, scaled, dist});
  }
  return rep;
}

}  // namespace cwb
