#include "cwb/links.hpp"

#include "cwb/transgression.hpp"

namespace cwb {

namespace {

// Rearranged copy with out.at(i,j) = m.at(rowmap[i], colmap[j]).
MatrixField reindex(const MatrixField& m, const std::vector<int>& rowmap,
                    const std::vector<int>& colmap) {
  MatrixField out(static_cast<int>(rowmap.size()), static_cast<int>(colmap.size()), m.npts);
  for (size_t i = 0; i < rowmap.size(); ++i)
    for (size_t j = 0; j < colmap.size(); ++j) out.at(i, j) = m.at(rowmap[i], colmap[j]);
  return out;
}

// Index map sending canonical block order to M's block order: for each
// canonical block (listed as M-block ids), emit M's flat indices.
std::vector<int> block_map(const std::vector<int>& m_block_sizes,
                           const std::vector<int>& canonical_as_m_blocks) {
  std::vector<int> offsets(m_block_sizes.size(), 0);
  for (size_t b = 1; b < m_block_sizes.size(); ++b)
    offsets[b] = offsets[b - 1] + m_block_sizes[b - 1];
  std::vector<int> map;
  for (int b : canonical_as_m_blocks)
    for (int i = 0; i < m_block_sizes[b]; ++i) map.push_back(offsets[b] + i);
  return map;
}

}  // namespace

LinkDatum LinkDatum::make(const TorusChart& c, int rE, int rF, int rG, int rH, int k,
                          const MatrixField& ell) {
  if (rE + rH != rF + rG) throw RankMismatch("link rank bookkeeping: rE+rH != rF+rG");
  if (ell.rows != rE + rH + k || ell.cols != rE + rH + k)
    throw RankMismatch("link matrix size mismatch");
  LinkDatum l;
  l.chart = c;
  l.rE = rE;
  l.rF = rF;
  l.rG = rG;
  l.rH = rH;
  l.k = k;
  l.ell = ell;
  if (l.ell.min_singular() < 1e-12) throw NotInvertible("link matrix singular somewhere");
  return l;
}

LinkDatum LinkDatum::identity(const TorusChart& c, int rE, int rF) {
  const int n = rE + rF;
  MatrixField swap(n, n, c.npts());
  for (int i = 0; i < rE; ++i) swap.at(rF + i, i) = Scal::Constant(c.npts(), Complex(1, 0));
  for (int j = 0; j < rF; ++j) swap.at(j, rE + j) = Scal::Constant(c.npts(), Complex(1, 0));
  // blocks: source [E, H=F], target [F, G=E]
  return make(c, rE, rF, rE, rF, 0, swap);
}

LinkDatum compose_links(const LinkDatum& l1, const LinkDatum& l2) {
  if (l1.chart != l2.chart) throw ChartMismatch("composing links over different charts");
  if (l1.rG != l2.rE || l1.rH != l2.rF)
    throw RankMismatch("composing links with mismatched middle pair");
  MatrixField sum = direct_sum(l1.ell, l2.ell);
  // direct-sum input blocks: [E, H, K1, G, K, K2]; output: [F, G, K1, H, J, K2]
  const std::vector<int> in_sizes{l1.rE, l1.rH, l1.k, l2.rE, l2.rH, l2.k};
  const std::vector<int> out_sizes{l1.rF, l1.rG, l1.k, l2.rF, l2.rG, l2.k};
  // canonical source [E, K, K1, K2, G, H], target [F, J, K1, K2, G, H]
  const std::vector<int> colmap = block_map(in_sizes, {0, 4, 2, 5, 3, 1});
  const std::vector<int> rowmap = block_map(out_sizes, {0, 4, 2, 5, 1, 3});
  MatrixField ell = reindex(sum, rowmap, colmap);
  return LinkDatum::make(l1.chart, l1.rE, l1.rF, l2.rG, l2.rH,
                         l1.k + l2.k + l1.rG + l1.rH, ell);
}

LinkDatum invert_link(const LinkDatum& l) {
  if (l.ell.max_condition() > 1e12)
    throw NotInvertible("link matrix too ill-conditioned to invert");
  MatrixField inv = l.ell.inverse();
  // inv blocks: [F, G, K] -> [E, H, K]; canonical for the inverse link:
  // source [G, F, K], target [H, E, K]
  const std::vector<int> in_sizes{l.rF, l.rG, l.k};
  const std::vector<int> out_sizes{l.rE, l.rH, l.k};
  const std::vector<int> colmap = block_map(in_sizes, {1, 0, 2});
  const std::vector<int> rowmap = block_map(out_sizes, {1, 0, 2});
  return LinkDatum::make(l.chart, l.rG, l.rH, l.rE, l.rF, l.k, reindex(inv, rowmap, colmap));
}

LinkDatum pad_stabilizer(const LinkDatum& l, int extra) {
  MatrixField sum = direct_sum(l.ell, MatrixField::identity(extra, l.chart.npts()));
  return LinkDatum::make(l.chart, l.rE, l.rF, l.rG, l.rH, l.k + extra, sum);
}

LinkDatum pad_sides(const LinkDatum& l, int a, int b) {
  MatrixField sum = direct_sum(direct_sum(l.ell, MatrixField::identity(a, l.chart.npts())),
                               MatrixField::identity(b, l.chart.npts()));
  // sum blocks in: [E, H, K, A, B]; out: [F, G, K, A, B]
  const std::vector<int> in_sizes{l.rE, l.rH, l.k, a, b};
  const std::vector<int> out_sizes{l.rF, l.rG, l.k, a, b};
  // canonical: source [(E,A), (H,B), K] , target [(F,B), (G,A), K]
  const std::vector<int> colmap = block_map(in_sizes, {0, 3, 1, 4, 2});
  const std::vector<int> rowmap = block_map(out_sizes, {0, 4, 1, 3, 2});
  return LinkDatum::make(l.chart, l.rE + a, l.rF + b, l.rG + a, l.rH + b, l.k,
                         reindex(sum, rowmap, colmap));
}

LinkDatum link_from_exact_sequence(const TorusChart& c, const MatrixField& a,
                                   const MatrixField& b, const MatrixField& cmap) {
  const int rP = a.cols, rQ = a.rows, rR = b.rows, rS = cmap.rows;
  if (b.cols != rQ || cmap.cols != rR) throw RankMismatch("exact sequence map shapes");
  if (rP - rQ + rR - rS != 0) throw NotExact("exact sequence rank alternating sum");
  const double scale = 1.0 + a.max_abs() + b.max_abs() + cmap.max_abs();
  if (rP > 0 && rQ > 0 && (b * a).max_abs() > 1e-10 * scale)
    throw NotExact("b . a does not vanish");
  if (rR > 0 && rS > 0 && (cmap * b).max_abs() > 1e-10 * scale)
    throw NotExact("c . b does not vanish");
  if (rP > 0 && a.min_singular() < 1e-7 * scale) throw NotExact("a not injective");
  if (rS > 0 && cmap.adjoint().min_singular() < 1e-7 * scale)
    throw NotExact("c not surjective");
  // right inverse of b on Im b, landing in (Im a)-perp:
  //   r_b = b^dagger (b b^dagger + c^dagger c)^{-1}
  MatrixField rb(rQ, rR, c.npts());
  if (rR > 0) {
    MatrixField s = b * b.adjoint() + cmap.adjoint() * cmap;
    if (s.min_eig_hermitian() < 1e-10 * scale * scale)
      throw NotExact("middle splitting operator singular (sequence not exact)");
    rb = b.adjoint() * s.inverse();
  }
  // l : P + R -> S + Q,  (p, r) |-> (c r, a p + r_b r)
  MatrixField ell(rS + rQ, rP + rR, c.npts());
  for (int i = 0; i < rS; ++i)
    for (int j = 0; j < rR; ++j) ell.at(i, rP + j) = cmap.at(i, j);
  for (int i = 0; i < rQ; ++i) {
    for (int j = 0; j < rP; ++j) ell.at(rS + i, j) = a.at(i, j);
    for (int j = 0; j < rR; ++j) ell.at(rS + i, rP + j) = rb.at(i, j);
  }
  return LinkDatum::make(c, rP, rS, rQ, rR, 0, ell);
}

void BundleComplex::validate() const {
  if (ranks.size() < 2) throw Error("complex needs at least two stages");
  if (maps.size() + 1 != ranks.size()) throw Error("complex map count mismatch");
  for (size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].cols != ranks[i] || maps[i].rows != ranks[i + 1])
      throw RankMismatch("complex map shape mismatch");
    if (i + 1 < maps.size()) {
      const double scale = 1.0 + maps[i].max_abs() + maps[i + 1].max_abs();
      if ((maps[i + 1] * maps[i]).max_abs() > 1e-10 * scale)
        throw Error("complex composition v v does not vanish");
    }
  }
  if (!metrics.empty()) {
    if (metrics.size() != ranks.size()) throw Error("complex needs one metric per stage");
    for (size_t i = 0; i < metrics.size(); ++i) {
      if (metrics[i].rows != ranks[i]) throw RankMismatch("stage metric rank mismatch");
      if ((metrics[i] - metrics[i].adjoint()).max_abs() > 1e-12)
        throw Error("stage metric not hermitian");
      if (metrics[i].min_eig_hermitian() <= 0) throw Error("stage metric not positive definite");
    }
  }
}

namespace {

MatrixField hermitian_sqrt(const MatrixField& h, bool inverse) {
  MatrixField out(h.rows, h.cols, h.npts);
  for (long p = 0; p < h.npts; ++p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.point(p));
    Eigen::VectorXd lam = es.eigenvalues();
    Eigen::VectorXd root(lam.size());
    for (int i = 0; i < lam.size(); ++i)
      root[i] = inverse ? 1.0 / std::sqrt(lam[i]) : std::sqrt(lam[i]);
    out.set_point(p, (es.eigenvectors() * root.asDiagonal() *
                      es.eigenvectors().adjoint())
                         .eval());
  }
  return out;
}

// Rewrite the complex on h-orthonormal frames: v~_i = S_{i+1} v_i S_i^{-1}
// with S = h^{1/2}; the harmonic splitting with identity metrics in the new
// frames realizes the metric orthocomplements of the original ones.
BundleComplex to_orthonormal_frames(const BundleComplex& c, std::vector<MatrixField>& sqrts,
                                    std::vector<MatrixField>& sqrt_invs) {
  sqrts.clear();
  sqrt_invs.clear();
  for (const auto& h : c.metrics) {
    sqrts.push_back(hermitian_sqrt(h, false));
    sqrt_invs.push_back(hermitian_sqrt(h, true));
  }
  BundleComplex t;
  t.chart = c.chart;
  t.ranks = c.ranks;
  for (size_t i = 0; i < c.maps.size(); ++i)
    t.maps.push_back(sqrts[i + 1] * c.maps[i] * sqrt_invs[i]);
  return t;
}

}  // namespace

std::vector<FrameField> complex_harmonic_frames(const BundleComplex& c) {
  c.validate();
  const int k = c.stages();
  std::vector<FrameField> harm(k);
  for (int i = 0; i < k; ++i) {
    // Delta_i = v_i^dagger v_i + v_{i-1} v_{i-1}^dagger at every point
    std::vector<Eigen::MatrixXcd> raw(c.chart.npts());
    int dim0 = -1;
    for (long p = 0; p < c.chart.npts(); ++p) {
      Eigen::MatrixXcd delta = Eigen::MatrixXcd::Zero(c.ranks[i], c.ranks[i]);
      if (i < k - 1) {
        Eigen::MatrixXcd v = c.maps[i].point(p);
        delta += v.adjoint() * v;
      }
      if (i > 0) {
        Eigen::MatrixXcd w = c.maps[i - 1].point(p);
        delta += w * w.adjoint();
      }
      raw[p] = kernel_basis(delta, 1e-7, dim0);
      if (p == 0) dim0 = static_cast<int>(raw[p].cols());
    }
    harm[i] = smooth_frames(c.chart, raw);
  }
  return harm;
}

LinkDatum link_from_complex(const BundleComplex& c, int parity) {
  if (!c.metrics.empty()) {
    c.validate();
    std::vector<MatrixField> sq, sqinv;
    BundleComplex t = to_orthonormal_frames(c, sq, sqinv);
    LinkDatum lt = link_from_complex(t, complex_harmonic_frames(t), parity);
    // conjugate the E-blocks back to the original trivializations
    std::vector<int> plus_stage, minus_stage;
    for (int i = 0; i < c.stages(); ++i)
      (((i + parity) % 2 == 1) ? plus_stage : minus_stage).push_back(i);
    MatrixField sin = MatrixField::identity(0, c.chart.npts());
    bool first = true;
    for (int i : plus_stage) {
      sin = first ? sq[i] : direct_sum(sin, sq[i]);
      first = false;
    }
    sin = direct_sum(sin, MatrixField::identity(lt.rH, c.chart.npts()));
    MatrixField sout = MatrixField::identity(0, c.chart.npts());
    first = true;
    for (int i : minus_stage) {
      sout = first ? sqinv[i] : direct_sum(sout, sqinv[i]);
      first = false;
    }
    sout = direct_sum(sout, MatrixField::identity(lt.rG, c.chart.npts()));
    return LinkDatum::make(c.chart, lt.rE, lt.rF, lt.rG, lt.rH, lt.k, sout * lt.ell * sin);
  }
  return link_from_complex(c, complex_harmonic_frames(c), parity);
}

namespace {

// Smooth pseudo-inverse of v_{i-1} : E^{i-1} -> E^i given harmonic frames
// at stage i: w_i = v^dagger (v v^dagger + v_i^dagger v_i + P_harm)^{-1}.
MatrixField stage_pseudo_inverse(const BundleComplex& c, const std::vector<FrameField>& harm,
                                 int i) {
  const MatrixField& v = c.maps[i - 1];
  MatrixField t = v * v.adjoint();
  if (i < c.stages() - 1) t += c.maps[i].adjoint() * c.maps[i];
  MatrixField hf = harm[i].as_field();
  if (hf.cols > 0) t += hf * hf.adjoint();
  if (t.min_eig_hermitian() < 1e-10) throw RankJump("stage splitting operator singular");
  return v.adjoint() * t.inverse();
}

}  // namespace

LinkDatum link_from_complex(const BundleComplex& c, const std::vector<FrameField>& harm,
                            int parity) {
  c.validate();
  const int k = c.stages();
  // even stages (1-based index i+1) form E^+; cohomology likewise
  std::vector<int> plus_stage, minus_stage;
  for (int i = 0; i < k; ++i) (((i + parity) % 2 == 1) ? plus_stage : minus_stage).push_back(i);
  int rEp = 0, rEm = 0, rHp = 0, rHm = 0;
  for (int i : plus_stage) rEp += c.ranks[i];
  for (int i : minus_stage) rEm += c.ranks[i];
  for (int i : plus_stage) rHp += harm[i].r;
  for (int i : minus_stage) rHm += harm[i].r;
  const long np = c.chart.npts();
  MatrixField ell(rEm + rHp, rEp + rHm, np);
  // offsets of stages within E+/-, H+/-
  auto offsets = [&](const std::vector<int>& st, bool of_h) {
    std::map<int, int> off;
    int o = 0;
    for (int i : st) {
      off[i] = o;
      o += of_h ? harm[i].r : c.ranks[i];
    }
    return off;
  };
  auto offEp = offsets(plus_stage, false), offEm = offsets(minus_stage, false);
  auto offHp = offsets(plus_stage, true), offHm = offsets(minus_stage, true);
  auto put = [&](int r0, int c0, const MatrixField& m) {
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) ell.at(r0 + i, c0 + j) += m.at(i, j);
  };
  for (int i : plus_stage) {
    // v_i : E^i -> E^{i+1} (odd target)
    if (i < k - 1) put(offEm[i + 1], offEp[i], c.maps[i]);
    // w_i : E^i -> E^{i-1}
    if (i > 0) put(offEm[i - 1], offEp[i], stage_pseudo_inverse(c, harm, i));
    // p_i : E^i -> H^i coordinates
    if (harm[i].r > 0) put(rEm + offHp[i], offEp[i], harm[i].as_field().adjoint());
  }
  for (int i : minus_stage) {
    // h_i : H^i -> E^i
    if (harm[i].r > 0) put(offEm[i], rEp + offHm[i], harm[i].as_field());
  }
  return LinkDatum::make(c.chart, rEp, rEm, rHp, rHm, 0, ell);
}

LinkDatum link_from_complex_hodge(const BundleComplex& c, const std::vector<FrameField>& harm,
                                  int parity) {
  c.validate();
  const int k = c.stages();
  std::vector<int> plus_stage, minus_stage;
  for (int i = 0; i < k; ++i) (((i + parity) % 2 == 1) ? plus_stage : minus_stage).push_back(i);
  int rEp = 0, rEm = 0, rHp = 0, rHm = 0;
  for (int i : plus_stage) rEp += c.ranks[i];
  for (int i : minus_stage) rEm += c.ranks[i];
  for (int i : plus_stage) rHp += harm[i].r;
  for (int i : minus_stage) rHm += harm[i].r;
  const long np = c.chart.npts();
  // 0 -> H+ -(h+)-> E+ -(v+ + (v-)*)-> E- -(p-)-> H- -> 0
  MatrixField hplus(rEp, rHp, np), mid(rEm, rEp, np), pminus(rHm, rEm, np);
  auto offsets = [&](const std::vector<int>& st, bool of_h) {
    std::map<int, int> off;
    int o = 0;
    for (int i : st) {
      off[i] = o;
      o += of_h ? harm[i].r : c.ranks[i];
    }
    return off;
  };
  auto offEp = offsets(plus_stage, false), offEm = offsets(minus_stage, false);
  auto offHp = offsets(plus_stage, true), offHm = offsets(minus_stage, true);
  auto put = [&](MatrixField& dst, int r0, int c0, const MatrixField& m) {
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) dst.at(r0 + i, c0 + j) += m.at(i, j);
  };
  for (int i : plus_stage) {
    if (harm[i].r > 0) put(hplus, offEp[i], offHp[i], harm[i].as_field());
    if (i < k - 1) put(mid, offEm[i + 1], offEp[i], c.maps[i]);
    if (i > 0) put(mid, offEm[i - 1], offEp[i], c.maps[i - 1].adjoint());
  }
  for (int i : minus_stage)
    if (harm[i].r > 0) put(pminus, offHm[i], offEm[i], harm[i].as_field().adjoint());
  return link_from_exact_sequence(c.chart, hplus, mid, pminus);
}

std::vector<long> det_windings(const LinkDatum& l) {
  Scal det = l.ell.det();
  std::vector<long> w(l.chart.dim, 0);
  for (int axis = 0; axis < l.chart.dim; ++axis) {
    const long s = l.chart.stride(axis);
    const int na = l.chart.n[axis];
    const long ncycles = l.chart.npts() / na;
    double common = 0;
    for (long cyc = 0; cyc < ncycles; ++cyc) {
      const long lo = cyc % s;
      const long hi = cyc / s;
      const long base = lo + hi * s * na;
      double total = 0;
      for (int j = 0; j < na; ++j) {
        const Complex z0 = det[base + j * s];
        const Complex z1 = det[base + ((j + 1) % na) * s];
        total += std::arg(z1 / z0);
      }
      const double turns = total / kTwoPi;
      const double nearest = std::round(turns);
      if (std::abs(turns - nearest) > 1e-6)
        throw Error("winding number failed to converge to an integer");
      if (cyc == 0)
        common = nearest;
      else if (nearest != common)
        throw Error("winding number varies across parallel cycles");
    }
    w[axis] = static_cast<long>(common);
  }
  return w;
}

LinkInvariants link_invariants(const LinkDatum& l, const LinkConnections& conns) {
  if (conns.E.rank != l.rE || conns.F.rank != l.rF || conns.G.rank != l.rG ||
      conns.H.rank != l.rH)
    throw RankMismatch("link connections do not match link ranks");
  Connection k =
      conns.K ? *conns.K : Connection::trivial(l.chart, l.k);
  if (k.rank != l.k) throw RankMismatch("stabilizer connection rank mismatch");
  Connection source = direct_sum(direct_sum(conns.E, conns.H), k);
  Connection target = direct_sum(direct_sum(conns.F, conns.G), k);
  Connection pulled = pullback(target, l.ell);
  Form t = cs_transgression(source, pulled);
  LinkInvariants inv;
  inv.chclass = cohomology_class(t);
  inv.windings = det_windings(l);
  return inv;
}

}  // namespace cwb
