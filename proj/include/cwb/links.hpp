#pragma once

#include "cwb/connection.hpp"
#include "cwb/frames.hpp"

namespace cwb {

/// Stabilized isomorphism l : E + H + K -> F + G + K witnessing
/// [E]-[F] = [G]-[H]; "a link between E-F and G-H".  Blocks of the matrix
/// field are ordered [E, H, K] -> [F, G, K].
///
/// Link equivalence (isotopy up to stabilization) is not decided here;
/// equality of the computable invariants (chclass, windings) is "weak
/// equivalence" throughout.
struct LinkDatum {
  TorusChart chart;
  int rE = 0, rF = 0, rG = 0, rH = 0, k = 0;
  MatrixField ell;

  int side_rank() const { return rE + rH + k; }
  static LinkDatum make(const TorusChart& c, int rE, int rF, int rG, int rH, int k,
                        const MatrixField& ell);
  /// Identity link between E-F and E-F (the block swap on E+F).
  static LinkDatum identity(const TorusChart& c, int rE, int rF);
};

LinkDatum compose_links(const LinkDatum& l1, const LinkDatum& l2);
LinkDatum invert_link(const LinkDatum& l);
/// Stabilize by L with the identity (the padding move of link equivalence).
LinkDatum pad_stabilizer(const LinkDatum& l, int extra);
/// Pad both defect pairs: between (E+A)-(F+B) and (G+A)-(H+B).
LinkDatum pad_sides(const LinkDatum& l, int a, int b);

/// Link from an exact sequence 0 -> P -a-> Q -b-> R -c-> S -> 0 between
/// P-S and Q-R, by metric splitting (identity stage metrics).
LinkDatum link_from_exact_sequence(const TorusChart& c, const MatrixField& a,
                                   const MatrixField& b, const MatrixField& cmap);

/// Complex of bundles 0 -> E^1 -v1-> E^2 -> ... -> E^k -> 0 with
/// v_{i+1} v_i = 0 pointwise and constant-rank cohomology.
struct BundleComplex {
  TorusChart chart;
  std::vector<int> ranks;           // rank of E^i, i = 1..k
  std::vector<MatrixField> maps;    // v_i : E^i -> E^{i+1}, i = 1..k-1
  std::vector<MatrixField> metrics; // optional hermitian stage metrics

  int stages() const { return static_cast<int>(ranks.size()); }
  void validate() const;  // composition residual, shapes, metric positivity
};

/// Harmonic frames per stage: H^i = Ker v_i intersect (Im v_{i-1})-perp.
std::vector<FrameField> complex_harmonic_frames(const BundleComplex& c);

/// The link v+ + w+ + p+ + h- : E+ + H- -> E- + H+ of the cohomology
/// construction (metric orthocomplement splitting).  Stage i (0-based) is
/// even/plus when (i + parity) is odd, matching the 1-based convention
/// E+ = sum of even-numbered stages; parity = 1 makes stage 0 plus (the
/// fibral-degree convention).
LinkDatum link_from_complex(const BundleComplex& c, int parity = 0);
LinkDatum link_from_complex(const BundleComplex& c, const std::vector<FrameField>& harm,
                            int parity = 0);

/// The alternative link of the same class from the exact sequence
/// 0 -> H+ -> E+ -(v+ + (v-)^*)-> E- -> H- -> 0 (between H+-H- and E+-E-).
LinkDatum link_from_complex_hodge(const BundleComplex& c, const std::vector<FrameField>& harm,
                                  int parity = 0);

/// Connections on the four bundles (and optionally the stabilizer; trivial
/// unitary by default).
struct LinkConnections {
  Connection E, F, G, H;
  std::optional<Connection> K;
};

struct LinkInvariants {
  FormClass chclass;            // class of ch~(E+H+K, l^*(F+G+K))
  std::vector<long> windings;   // per-coordinate winding of det l
};

LinkInvariants link_invariants(const LinkDatum& l, const LinkConnections& conns);

/// Winding numbers of det(l) around each coordinate cycle.
std::vector<long> det_windings(const LinkDatum& l);

}  // namespace cwb
