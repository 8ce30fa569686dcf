#pragma once

#include "cwb/transgression.hpp"

namespace cwb {

/// Relative K-theory generator: two flat bundles with a smooth isomorphism
/// between them, plus a formal sign.
struct RelKGenerator {
  Connection e;       // flat
  Connection f_conn;  // flat
  MatrixField f;      // pointwise invertible, rank e.rank
  int sign = 1;

  static RelKGenerator make(const Connection& e, const Connection& f_conn,
                            const MatrixField& f, int sign = 1);
};

/// Free multiplicative K-theory generator: bundle with any connection and
/// an odd-degree form (class-level representative).
struct FreeMultGenerator {
  Connection e;
  Form alpha;  // odd degrees only
  int sign = 1;

  static FreeMultGenerator make(const Connection& e, const Form& alpha, int sign = 1);
};

FormClass nadel_class(const RelKGenerator& g);

RelKGenerator direct_sum(const RelKGenerator& a, const RelKGenerator& b);

/// ch(nabla) - d alpha; closed.
Form chern_hat(const FreeMultGenerator& g);

/// Trade the connection for new_conn, shifting alpha by the transgression;
/// chern_hat is invariant.
FreeMultGenerator normalize_change_connection(const FreeMultGenerator& g,
                                              const Connection& new_conn);

/// Borel-type class ch~(nabla*, nabla) - alpha + conj(alpha); purely
/// imaginary modulo exact forms.  Uses the generator's metric, defaulting
/// to the identity.
FormClass borel_class(const FreeMultGenerator& g);

/// Conjugation involution: both connections replaced by their adjoints.
RelKGenerator conjugate_relk(const RelKGenerator& g);

/// Membership predicate for the multiplicative subgroup: the class of
/// d alpha - ch(nabla) + rank vanishes.
bool is_multiplicative(const FreeMultGenerator& g, double tol = 1e-8);

/// Phi-scaled periods with nearest-integer distances, per subset.
struct IntegralityEntry {
  Subset subset;
  Complex period;
  double nearest_integer_distance;
};
struct IntegralityReport {
  std::vector<IntegralityEntry> entries;
  double max_distance() const;
};
IntegralityReport phi_integrality_report(const FormClass& c);

}  // namespace cwb
