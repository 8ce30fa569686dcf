#pragma once

#include <optional>

#include "cwb/form.hpp"

namespace cwb {

/// Connection nabla = d + A on a trivialized rank-r bundle over a torus
/// chart; A is an End-valued 1-form, the optional metric a pointwise
/// Hermitian positive-definite field.
///
/// Holonomy convention: parallel transport around the +x_a cycle is the
/// path-ordered exponential of -A; for A = i theta dx on a line bundle the
/// holonomy is exp(-2 pi i theta).
struct Connection {
  TorusChart chart;
  int rank = 1;
  Form coeff;  // degree-1 components only
  std::optional<MatrixField> metric;

  static Connection trivial(const TorusChart& c, int rank);
  static Connection make(const TorusChart& c, const Form& coeff,
                         std::optional<MatrixField> metric = std::nullopt);

  const MatrixField& require_metric() const;
  Connection with_metric(const MatrixField& h) const;
  Connection with_identity_metric() const;
};

/// dA + A^A as an End-valued 2-form.
Form curvature(const Connection& c);

/// ||curvature||_inf; flat means < 1e-8 * (1 + ||A||_inf^2).
double flatness_residual(const Connection& c);
bool is_flat(const Connection& c);

/// ||dh - A^dagger h - h A||_inf, zero when the connection respects h.
double metric_compat_residual(const Connection& c);

/// phi Tr exp(-nabla^2), the finite power series cut at floor(dim/2).
Form chern_character(const Connection& c);

/// Adjoint transpose connection: the unique solution of
/// h(nabla*_v s, t) = v.h(s,t) - h(s, nabla_v t) on a trivialized bundle,
/// A* = h^{-1} dh - h^{-1} A^dagger h.  Involutive; requires a metric.
Connection adjoint_connection(const Connection& c);

/// nabla^u = (nabla + nabla*)/2; respects the metric.
Connection unitary_part(const Connection& c);

Connection direct_sum(const Connection& a, const Connection& b);

/// Pullback g^* nabla with coefficient g^{-1} dg + g^{-1} A g.
Connection pullback(const Connection& c, const MatrixField& g);

/// Superconnection A = nabla + omega on C^{r+} + C^{r-}: nabla block
/// diagonal, omega an End-valued form of globally odd degree.
struct Superconnection {
  int rank_plus = 1, rank_minus = 1;
  Connection even_part;  // rank r+ + r-
  Form odd_form;

  int rank() const { return rank_plus + rank_minus; }
  int split() const { return rank_plus; }
  static Superconnection make(int rplus, int rminus, const Connection& even, const Form& odd);
};

/// Curvature A^2 = d(A0+omega) + (A0+omega)^2 in the graded product.
Form curvature_super(const Superconnection& a);

/// ch(A) = phi Tr_s exp(-A^2); even form, closed, class ch(E+) - ch(E-).
Form chern_character_super(const Superconnection& a);

/// A^S = nabla* + omega^S (special adjoint of the odd part).
Superconnection adjoint_super(const Superconnection& a);

/// Connection with real coefficient (and real metric) on a real bundle seen
/// inside its complexification; unitary when A is metric-antisymmetric.
struct RealBundleConnection {
  Connection conn;
  static RealBundleConnection make(const Connection& c);
};

/// Pfaffian of (1/2pi) nabla^2 for even rank <= 4; zero form for odd rank.
Form euler_form(const RealBundleConnection& c);

/// Pfaffian of an antisymmetric matrix of (even-degree) forms, rank 2 or 4.
Form pfaffian(const std::vector<std::vector<Form>>& entries);

}  // namespace cwb
