#pragma once

#include <cstdint>
#include <map>

#include "cwb/field.hpp"

namespace cwb {

/// Coordinate subset S of {0,...,dim-1} as a bitmask; |S| is the form degree.
using Subset = std::uint8_t;

int subset_size(Subset s);
/// Sign of merging the sorted tuples S and T into sorted S union T.
int shuffle_sign(Subset s, Subset t);
/// Sign in dx_axis ^ dx_S = sign * dx_{S union {axis}}.
int insertion_sign(int axis, Subset s);

/// Multi-degree complex matrix-valued differential form on a torus chart.
/// Component for subset S holds the coefficient of dx_S; rank 1 is scalar.
struct Form {
  TorusChart chart;
  int rank = 1;
  std::map<Subset, MatrixField> comp;

  static Form zero(const TorusChart& c, int rank = 1);
  static Form scalar(const TorusChart& c, const Scal& values);
  static Form endo(const TorusChart& c, Subset s, const MatrixField& m);
  /// The basis one-form dx_axis (scalar, coefficient 1).
  static Form coordinate_one_form(const TorusChart& c, int axis);

  bool has(Subset s) const { return comp.count(s) != 0; }
  const MatrixField& at(Subset s) const;
  /// Coefficient field of S, materializing zero if absent.
  MatrixField get(Subset s) const;

  int max_degree() const;
  Form degree_part(int k) const;
  bool is_zero(double tol = 0.0) const;

  Form& operator+=(const Form& o);
  Form& operator-=(const Form& o);
  Form& operator*=(Complex s);
};

Form operator+(Form a, const Form& b);
Form operator-(Form a, const Form& b);
Form operator*(Complex s, Form a);

/// y += alpha * x without temporaries (hot path).
void form_axpy(Form& y, Complex alpha, const Form& x);

/// Graded product; for matrix ranks the coefficients multiply pointwise.
/// Scalar (rank 1) factors act on anything.
Form wedge(const Form& a, const Form& b);

/// Product of End-valued forms on a Z2-graded bundle C^split + C^(rank-split),
/// with the Koszul sign on (odd endomorphism) x (form degree).
Form super_wedge(const Form& a, const Form& b, int split);

/// Supercommutator [a,b] = ab - (-1)^{|a||b|} ba for globally homogeneous
/// a, b of the given total parities (0 even / 1 odd).
Form super_commutator(const Form& a, int par_a, const Form& b, int par_b, int split);

/// Spectral exterior derivative; d.d = 0 to machine precision on
/// band-limited inputs.
Form exterior_derivative(const Form& a);

Form trace_form(const Form& a);
/// Trace on the top-left split block minus trace on the bottom-right block.
Form supertrace_form(const Form& a, int split);

/// phi: divide degree 2k and 2k-1 components by (2 pi i)^k.
Form phi_normalize(const Form& a);
/// Phi: multiply degree 2k and 2k-1 components by k!.
Form phi_cap(const Form& a);

/// Special adjoint of an End-valued form on a Z2-graded bundle with the
/// standard (identity) metric: component of degree p and endomorphism
/// parity e maps to (-1)^{p(p+1)/2 + p e} times its conjugate transpose.
Form special_adjoint(const Form& a, int split);

/// Entrywise complex conjugate (coefficients only; basis dx_S is real).
Form conj(const Form& a);
/// Pointwise conjugate transpose of every component.
Form adjoint_form(const Form& a);

/// (2 pi / n_1)...(2 pi / n_d) times the fixed-order sum of the top
/// component; zero if the top component is absent.
Complex integrate_top(const Form& a);

double linf(const Form& a);

/// Block-diagonal direct sum of two End-valued forms of equal degree layout.
Form form_direct_sum(const Form& a, const Form& b);

/// De Rham class data: constant Fourier mode of every component.
struct FormClass {
  int rank = 1;
  std::map<Subset, Eigen::MatrixXcd> periods;

  Eigen::MatrixXcd period(Subset s, int rank_hint = -1) const;
  FormClass& operator+=(const FormClass& o);
  FormClass& operator-=(const FormClass& o);
  FormClass& operator*=(Complex s);
};

FormClass operator+(FormClass a, const FormClass& b);
FormClass operator-(FormClass a, const FormClass& b);
FormClass operator*(Complex s, FormClass a);
FormClass conj(const FormClass& c);

/// Max |period| over all subsets.
double class_norm(const FormClass& c);
double class_distance(const FormClass& a, const FormClass& b);
/// Max |real part of period| over all subsets.
double class_real_norm(const FormClass& c);
double class_norm_degree(const FormClass& c, int degree);

/// Harmonic projection of a closed form: per-component grid means.
/// Throws NotClosed when ||da||_inf > 1e-8 * (1 + ||a||_inf).
FormClass cohomology_class(const Form& a);
/// Same without the closedness gate (for forms known closed only in a
/// quotient sense, e.g. degree-pruned representatives).
FormClass raw_periods(const Form& a);

}  // namespace cwb
