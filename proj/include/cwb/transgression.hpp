#pragma once

#include "cwb/connection.hpp"

namespace cwb {

/// Gauss-Legendre nodes/weights on [0,1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// Path of connections A(t) = sum_k poly[k] t^k joining A(0) and A(1).
/// Linear and curved (quadratic bump) paths are exact in this
/// representation, and node lists are interpolated exactly for small
/// counts, so the t-derivative is analytic and Gauss-Legendre quadrature
/// integrates the transgression integrand without discretization error.
struct ConnectionPath {
  TorusChart chart;
  int rank = 1;
  std::vector<Form> poly;  // End-valued 1-forms
  int quadrature_order = 8;

  static ConnectionPath linear(const Connection& a, const Connection& b, int order = 8);
  /// Linear path plus t(1-t) * bump.
  static ConnectionPath curved(const Connection& a, const Connection& b, const Form& bump,
                               int order = 8);
  /// Exact polynomial through uniformly spaced nodes (at most 9).
  static ConnectionPath from_nodes(const std::vector<Form>& nodes, int order = 8);

  Form coeff_at(double t) const;
  Form deriv_at(double t) const;
  Connection connection_at(double t) const;
};

/// Chern-Simons transgression ch~(nabla_0, nabla_1): odd form with
/// d ch~ = ch(nabla_1) - ch(nabla_0), computed as the quadrature of
/// -phi Tr( dA/dt exp(-F_t) ).
Form cs_transgression(const ConnectionPath& p);
Form cs_transgression(const Connection& a, const Connection& b, int order = 8);

/// Path of unitary real-bundle connections, linear in the coefficient.
struct RealPath {
  TorusChart chart;
  int rank = 2;
  Form a0, a1;  // real antisymmetric 1-forms
  int quadrature_order = 8;
};

/// Euler transgression e~(nabla_0, nabla_1) with d e~ = e_1 - e_0.
Form euler_transgression(const RealPath& p);

/// Fiber integral over [0,1] of e(path) ^ ch(path) for simultaneous paths;
/// equals the combinations of Euler/Chern transgressions modulo exact forms.
Form euler_chern_wedge_transgression(const RealPath& ep, const ConnectionPath& cp);

/// Closed-form flat transgression: for omega = f^*nabla_F - nabla_E between
/// flat connections,
///   ch~ = - sum_{r>=1} (1/2 pi i)^r ((r-1)!/(2r-1)!) Tr(omega^{2r-1}).
Form nadel_flat_closed_form(const Form& omega);

/// Nadel class of the quintuple (E, nabla_E, F, nabla_F, f): class of
/// ch~(nabla_E, f^* nabla_F).  Requires both connections flat and f
/// pointwise invertible.
FormClass nadel_class(const Connection& e, const Connection& f_conn, const MatrixField& f);

/// ch~(nabla*, nabla) along the linear path; purely imaginary class.
Form conjugation_transgression(const Connection& c);

}  // namespace cwb
