#include "cwb/families.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cwb/random.hpp"

namespace cwb {

TorusFibration TorusFibration::make(const TorusChart& total, int base_dim) {
  TorusFibration f;
  if (base_dim < 1 || base_dim >= total.dim) throw Error("fibration base dimension out of range");
  f.total = total;
  f.base_dim = base_dim;
  f.fiber_dim = total.dim - base_dim;
  if (f.base_dim > 2 || f.fiber_dim > 2) throw Error("fibration limited to base, fiber dim <= 2");
  return f;
}

TorusChart TorusFibration::base() const {
  std::vector<int> sizes(total.n.begin(), total.n.begin() + base_dim);
  return TorusChart::make(sizes);
}

TorusChart TorusFibration::fiber() const {
  std::vector<int> sizes(total.n.begin() + base_dim, total.n.begin() + base_dim + fiber_dim);
  return TorusChart::make(sizes);
}

void FiberBasis::decode(long idx, int& sub, std::array<int, 2>& k, int& c) const {
  c = static_cast<int>(idx % rank);
  idx /= rank;
  long mf = idx % modes();
  sub = static_cast<int>(idx / modes());
  k = {0, 0};
  for (int a = 0; a < n; ++a) {
    k[a] = static_cast<int>(mf % modes_per_axis()) - K;
    mf /= modes_per_axis();
  }
}

namespace {

// Fourier modes of a fiber-dependent r x r coefficient at one base point.
ModeList fiber_modes(const TorusFibration& fib, const MatrixField& coeff, long base_pt,
                     int* band_out) {
  const TorusChart fc = fib.fiber();
  const long fn = fc.npts();
  const int r = coeff.rows;
  std::vector<Scal> hat(static_cast<size_t>(r) * r, Scal(fn));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      Scal line(fn);
      for (long z = 0; z < fn; ++z) line[z] = coeff.at(i, j)[fib.total_index(base_pt, z)];
      fft_forward(fc, line);
      hat[i * r + j] = line / static_cast<double>(fn);
    }
  double maxmag = 0;
  for (const auto& h : hat) maxmag = std::max(maxmag, h.abs().maxCoeff());
  const double tol = 1e-12 * (1.0 + maxmag);
  ModeList modes;
  int band = 0;
  for (long z = 0; z < fn; ++z) {
    Eigen::MatrixXcd m(r, r);
    double mag = 0;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        m(i, j) = hat[i * r + j][z];
        mag = std::max(mag, std::abs(m(i, j)));
      }
    if (mag <= tol) continue;
    std::array<int, 2> k{0, 0};
    long q = z;
    int kinf = 0;
    for (int a = 0; a < fib.fiber_dim; ++a) {
      const int na = fc.n[a];
      const int j = static_cast<int>(q % na);
      q /= na;
      k[a] = (j <= (na - 1) / 2) ? j : j - na;
      kinf = std::max(kinf, std::abs(k[a]));
    }
    band = std::max(band, kinf);
    modes.emplace_back(k, std::move(m));
  }
  if (band_out) *band_out = std::max(*band_out, band);
  return modes;
}

}  // namespace

VerticalComplex build_vertical_complex(const TorusFibration& fib, const Connection& conn,
                                       int K) {
  if (conn.chart != fib.total) throw ChartMismatch("connection chart does not match fibration");
  VerticalComplex vc;
  vc.fib = fib;
  vc.K = K;
  vc.rank = conn.rank;
  vc.basis = FiberBasis{fib.fiber_dim, K, conn.rank};
  const long nb = fib.base_npts();
  int band = 0;
  vc.vert_modes.resize(fib.fiber_dim);
  for (int a = 0; a < fib.fiber_dim; ++a) {
    const Subset s = static_cast<Subset>(1u << (fib.base_dim + a));
    MatrixField c = conn.coeff.get(s);
    vc.vert_modes[a].reserve(nb);
    for (long y = 0; y < nb; ++y) vc.vert_modes[a].push_back(fiber_modes(fib, c, y, &band));
  }
  vc.horiz_modes.resize(fib.base_dim);
  for (int j = 0; j < fib.base_dim; ++j) {
    const Subset s = static_cast<Subset>(1u << j);
    MatrixField c = conn.coeff.get(s);
    vc.horiz_modes[j].reserve(nb);
    for (long y = 0; y < nb; ++y) vc.horiz_modes[j].push_back(fiber_modes(fib, c, y, &band));
  }
  vc.fiber_band = band;
  if (K < 2 * band)
    throw BandLimitExceeded("fiber truncation K below twice the coefficient band");
  for (long i = 0; i < vc.basis.dim(); ++i) {
    int sub, c;
    std::array<int, 2> k;
    vc.basis.decode(i, sub, k, c);
    (subset_size(static_cast<Subset>(sub)) % 2 == 0 ? vc.plus_idx : vc.minus_idx).push_back(i);
  }
  return vc;
}

Eigen::MatrixXcd VerticalComplex::d_vert(long y) const {
  const long d = basis.dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (long src = 0; src < d; ++src) {
    int sub, c;
    std::array<int, 2> k;
    basis.decode(src, sub, k, c);
    for (int a = 0; a < fib.fiber_dim; ++a) {
      if (sub & (1 << a)) continue;
      const int sgn = insertion_sign(a, static_cast<Subset>(sub));
      const int tsub = sub | (1 << a);
      // derivative term i k_a
      m(basis.index(tsub, k, c), src) += Complex(0, sgn * k[a]);
      // twist term: convolution by the coefficient modes
      for (const auto& [kap, mat] : vert_modes[a][y]) {
        std::array<int, 2> kt{k[0] + kap[0], k[1] + kap[1]};
        if (!basis.in_range(kt)) continue;
        for (int cp = 0; cp < rank; ++cp)
          m(basis.index(tsub, kt, cp), src) += static_cast<double>(sgn) * mat(cp, c);
      }
    }
  }
  return m;
}

Eigen::MatrixXcd VerticalComplex::dirac_full(long y) const {
  Eigen::MatrixXcd d = d_vert(y);
  return d + d.adjoint();
}

Eigen::MatrixXcd VerticalComplex::dirac_plus(long y) const {
  Eigen::MatrixXcd d = dirac_full(y);
  Eigen::MatrixXcd b(minus_idx.size(), plus_idx.size());
  for (size_t i = 0; i < minus_idx.size(); ++i)
    for (size_t j = 0; j < plus_idx.size(); ++j) b(i, j) = d(minus_idx[i], plus_idx[j]);
  return b;
}

Eigen::MatrixXcd VerticalComplex::horizontal_mult(long y, int base_axis) const {
  const long d = basis.dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (long src = 0; src < d; ++src) {
    int sub, c;
    std::array<int, 2> k;
    basis.decode(src, sub, k, c);
    for (const auto& [kap, mat] : horiz_modes[base_axis][y]) {
      std::array<int, 2> kt{k[0] + kap[0], k[1] + kap[1]};
      if (!basis.in_range(kt)) continue;
      for (int cp = 0; cp < rank; ++cp) m(basis.index(sub, kt, cp), src) += mat(cp, c);
    }
  }
  return m;
}

Eigen::MatrixXcd VerticalComplex::vertical_wedge_const(
    const std::vector<Eigen::MatrixXcd>& b) const {
  const long d = basis.dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (long src = 0; src < d; ++src) {
    int sub, c;
    std::array<int, 2> k;
    basis.decode(src, sub, k, c);
    for (int a = 0; a < fib.fiber_dim; ++a) {
      if (sub & (1 << a)) continue;
      const int sgn = insertion_sign(a, static_cast<Subset>(sub));
      const int tsub = sub | (1 << a);
      for (int cp = 0; cp < rank; ++cp)
        m(basis.index(tsub, k, cp), src) += static_cast<double>(sgn) * b[a](cp, c);
    }
  }
  return m;
}

Eigen::MatrixXcd fiber_hodge_star(const VerticalComplex& vc) {
  const int n = vc.fib.fiber_dim;
  const int ns = 1 << n;
  // *_Z = c(e_1) c(e_2) ... c(e_n): the rightmost factor applies first
  Eigen::MatrixXd act = Eigen::MatrixXd::Identity(ns, ns);
  for (int a = 0; a < n; ++a) {
    Eigen::MatrixXd ca = Eigen::MatrixXd::Zero(ns, ns);
    for (int s = 0; s < ns; ++s) {
      if (s & (1 << a)) {
        const int sgn = insertion_sign(a, static_cast<Subset>(s & ~(1 << a)));
        ca((s & ~(1 << a)), s) = -sgn;  // minus interior product
      } else {
        const int sgn = insertion_sign(a, static_cast<Subset>(s));
        ca((s | (1 << a)), s) = sgn;  // wedge
      }
    }
    act = act * ca;
  }
  const long d = vc.basis.dim();
  Eigen::MatrixXcd star = Eigen::MatrixXcd::Zero(d, d);
  for (long src = 0; src < d; ++src) {
    int sub, c;
    std::array<int, 2> k;
    vc.basis.decode(src, sub, k, c);
    for (int t = 0; t < ns; ++t)
      if (act(t, sub) != 0.0) star(vc.basis.index(t, k, c), src) = act(t, sub);
  }
  return star;
}

namespace {

Eigen::MatrixXcd embed_rows(const Eigen::MatrixXcd& compact, const std::vector<long>& idx,
                            long fulldim, long extra_offset, long extra_count) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(fulldim, compact.cols());
  const long core = static_cast<long>(idx.size());
  for (long i = 0; i < core; ++i) out.row(idx[i]) = compact.row(i);
  for (long i = 0; i < extra_count; ++i) out.row(extra_offset + i) = compact.row(core + i);
  return out;
}

}  // namespace

HarmonicKernels harmonic_kernels(const VerticalComplex& vc) {
  const TorusChart base = vc.fib.base();
  const long nb = base.npts();
  std::vector<Eigen::MatrixXcd> raw_p(nb), raw_m(nb);
  int dim_p = -1, dim_m = -1;
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd dp = vc.dirac_plus(y);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(dp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double thr = 1e-7 * std::max(s.size() ? s.maxCoeff() : 0.0, 1.0);
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s[i] > thr) ++rank;
    const int kp = static_cast<int>(dp.cols()) - rank;
    const int km = static_cast<int>(dp.rows()) - rank;
    if (y == 0) {
      dim_p = kp;
      dim_m = km;
    } else if (kp != dim_p || km != dim_m) {
      throw DimensionJump("fibral kernel dimension varies over the base");
    }
    raw_p[y] = embed_rows(svd.matrixV().rightCols(kp), vc.plus_idx, vc.basis.dim(), 0, 0);
    raw_m[y] = embed_rows(svd.matrixU().rightCols(km), vc.minus_idx, vc.basis.dim(), 0, 0);
  }
  HarmonicKernels h;
  h.plus = smooth_frames(base, raw_p);
  h.minus = smooth_frames(base, raw_m);
  return h;
}

FiniteRankSubbundle mf_subbundle(const VerticalComplex& vc, double cutoff) {
  const TorusChart base = vc.fib.base();
  const long nb = base.npts();
  std::vector<Eigen::MatrixXcd> raw_p(nb), raw_m(nb);
  int dim_p = -1, dim_m = -1;
  double gap = std::numeric_limits<double>::infinity();
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd dp = vc.dirac_plus(y);
    for (int side = 0; side < 2; ++side) {
      Eigen::MatrixXcd h = (side == 0) ? Eigen::MatrixXcd(dp.adjoint() * dp)
                                       : Eigen::MatrixXcd(dp * dp.adjoint());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
      const auto& lam = es.eigenvalues();
      int count = 0;
      for (int i = 0; i < lam.size(); ++i) {
        const double ev = std::sqrt(std::max(lam[i], 0.0));
        if (std::abs(ev - cutoff) < 1e-8) throw NoSpectralGap("spectrum touches the cutoff");
        if (ev < cutoff)
          ++count;
        else
          gap = std::min(gap, ev);
      }
      int& dim = (side == 0) ? dim_p : dim_m;
      if (y == 0)
        dim = count;
      else if (count != dim)
        throw NoSpectralGap("eigenvalue count below the cutoff varies over the base");
      Eigen::MatrixXcd vecs = es.eigenvectors().leftCols(count);
      if (side == 0)
        raw_p[y] = embed_rows(vecs, vc.plus_idx, vc.basis.dim(), 0, 0);
      else
        raw_m[y] = embed_rows(vecs, vc.minus_idx, vc.basis.dim(), 0, 0);
    }
  }
  FiniteRankSubbundle f;
  f.plus = smooth_frames(base, raw_p);
  f.minus = smooth_frames(base, raw_m);
  f.gap = gap;
  return f;
}

Connection gauss_manin(const VerticalComplex& vc, const FrameField& frames, int /*eta_rank*/,
                       bool adjoint_version) {
  const TorusChart base = vc.fib.base();
  const long nb = base.npts();
  const long fulldim = vc.basis.dim();
  if (frames.N < fulldim) throw RankMismatch("frames smaller than the truncated space");
  const int r = frames.r;
  MatrixField ff = frames.as_field();
  Form coeff = Form::zero(base, r);
  for (int j = 0; j < vc.fib.base_dim; ++j) {
    MatrixField df(frames.N, r, nb);
    for (int i = 0; i < frames.N; ++i)
      for (int cc = 0; cc < r; ++cc)
        df.at(i, cc) = spectral_derivative(base, ff.at(i, cc), j);
    MatrixField a(r, r, nb);
    for (long y = 0; y < nb; ++y) {
      Eigen::MatrixXcd h = vc.horizontal_mult(y, j);
      Eigen::MatrixXcd f = frames.F[y];
      Eigen::MatrixXcd dfy = df.point(y);
      Eigen::MatrixXcd hf = Eigen::MatrixXcd::Zero(frames.N, r);
      if (adjoint_version)
        hf.topRows(fulldim) = -(h.adjoint() * f.topRows(fulldim));
      else
        hf.topRows(fulldim) = h * f.topRows(fulldim);
      a.set_point(y, (f.adjoint() * (dfy + hf)).eval());
    }
    coeff.comp.emplace(static_cast<Subset>(1u << j), std::move(a));
  }
  Connection out;
  out.chart = base;
  out.rank = r;
  out.coeff = coeff;
  return out;
}

FlatDirectImage direct_image_flat_pkg(const TorusFibration& fib, const Connection& conn,
                                      int K) {
  VerticalComplex vc = build_vertical_complex(fib, conn, K);
  FlatDirectImage out;
  out.kernels = harmonic_kernels(vc);
  out.gm_plus = gauss_manin(vc, out.kernels.plus);
  out.gm_minus = gauss_manin(vc, out.kernels.minus);
  return out;
}

std::vector<std::pair<Connection, int>> direct_image_flat(const TorusFibration& fib,
                                                          const Connection& conn, int K) {
  FlatDirectImage pkg = direct_image_flat_pkg(fib, conn, K);
  std::vector<std::pair<Connection, int>> out;
  if (pkg.kernels.plus.r > 0) out.emplace_back(pkg.gm_plus, +1);
  if (pkg.kernels.minus.r > 0) out.emplace_back(pkg.gm_minus, -1);
  return out;
}

Eigen::MatrixXcd SuitableData::psi_at(long y, long rows, long cols) const {
  if (psi.empty()) return Eigen::MatrixXcd::Zero(rows, cols);
  const Eigen::MatrixXcd& m = psi[y];
  if (m.rows() != rows || m.cols() != cols) throw RankMismatch("suitable data psi shape");
  return m;
}

namespace {

struct AugmentedSetup {
  std::vector<VerticalComplex> vcs;  // at t_q = q / steps
  long plus_core = 0, minus_core = 0;
  int eta0p = 0, eta0m = 0, eta1p = 0, eta1m = 0;
  const SuitableData* s0 = nullptr;
  const SuitableData* s1 = nullptr;
  std::function<Eigen::MatrixXcd(long, double)> psi_override;

  long pdim() const { return plus_core + eta0p + eta1p; }
  long mdim() const { return minus_core + eta0m + eta1m; }

  // psi of s0 / s1 extended by zero into the combined eta blocks and
  // linearly interpolated in t
  Eigen::MatrixXcd psi_tilde(long y, double t) const {
    if (psi_override) return psi_override(y, t);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(mdim(), pdim());
    Eigen::MatrixXcd p0 = s0->psi_at(y, minus_core + eta0m, plus_core + eta0p);
    Eigen::MatrixXcd p1 = s1->psi_at(y, minus_core + eta1m, plus_core + eta1p);
    // row blocks [core, eta0m, eta1m]; column blocks [core, eta0p, eta1p]
    out.topLeftCorner(minus_core, plus_core) =
        (1 - t) * p0.topLeftCorner(minus_core, plus_core) +
        t * p1.topLeftCorner(minus_core, plus_core);
    out.block(minus_core, 0, eta0m, plus_core) =
        (1 - t) * p0.block(minus_core, 0, eta0m, plus_core);
    out.block(0, plus_core, minus_core, eta0p) =
        (1 - t) * p0.block(0, plus_core, minus_core, eta0p);
    out.block(minus_core, plus_core, eta0m, eta0p) =
        (1 - t) * p0.block(minus_core, plus_core, eta0m, eta0p);
    out.block(minus_core + eta0m, 0, eta1m, plus_core) =
        t * p1.block(minus_core, 0, eta1m, plus_core);
    out.block(0, plus_core + eta0p, minus_core, eta1p) =
        t * p1.block(0, plus_core, minus_core, eta1p);
    out.block(minus_core + eta0m, plus_core + eta0p, eta1m, eta1p) =
        t * p1.block(minus_core, plus_core, eta1m, eta1p);
    return out;
  }

  Eigen::MatrixXcd dplus(long y, int q) const {
    const double t = static_cast<double>(q) / (static_cast<int>(vcs.size()) - 1);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(mdim(), pdim());
    out.topLeftCorner(minus_core, plus_core) = vcs[q].dirac_plus(y);
    out += psi_tilde(y, t);
    return out;
  }
};

// smallest singular value of a wide matrix via inverse iteration on the
// Gram matrix (conservative; 0 when the Gram factorization fails)
double min_singular_estimate(const Eigen::MatrixXcd& a) {
  Eigen::MatrixXcd g = a * a.adjoint();
  Eigen::LLT<Eigen::MatrixXcd> llt(g);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(g.rows());
  if (v.size() == 0) return std::numeric_limits<double>::infinity();
  v.normalize();
  double lam = 0;
  for (int it = 0; it < 12; ++it) {
    Eigen::VectorXcd w = llt.solve(v);
    const double norm = w.norm();
    if (norm == 0) return 0.0;
    lam = 1.0 / norm;
    v = w / norm;
  }
  return std::sqrt(lam);
}

// x minus the A-row-space component, for surjective A
Eigen::MatrixXcd kernel_project(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& x) {
  Eigen::MatrixXcd g = a * a.adjoint();
  Eigen::LLT<Eigen::MatrixXcd> llt(g);
  return x - a.adjoint() * llt.solve(a * x);
}

FrameField kernel_frames_svd(const TorusChart& base, const AugmentedSetup& setup, int q,
                             bool left_kernel) {
  const long nb = base.npts();
  std::vector<Eigen::MatrixXcd> raw(nb);
  int dim = -1;
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd a = setup.dplus(y, q);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double thr = 1e-7 * std::max(s.size() ? s.maxCoeff() : 0.0, 1.0);
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s[i] > thr) ++rank;
    const int k = static_cast<int>(left_kernel ? a.rows() : a.cols()) - rank;
    if (dim < 0)
      dim = k;
    else if (k != dim)
      throw DimensionJump("suitable-data kernel dimension varies over the base");
    raw[y] = left_kernel ? svd.matrixU().rightCols(k) : svd.matrixV().rightCols(k);
  }
  // embed into full + eta coordinates for downstream Gauss-Manin use
  const VerticalComplex& vc = setup.vcs[q];
  const long fulldim = vc.basis.dim();
  const long etap = setup.eta0p + setup.eta1p;
  const long etam = setup.eta0m + setup.eta1m;
  std::vector<Eigen::MatrixXcd> emb(nb);
  for (long y = 0; y < nb; ++y) {
    if (left_kernel)
      emb[y] = embed_rows(raw[y], vc.minus_idx, fulldim + etap + etam, fulldim + etap, etam);
    else
      emb[y] = embed_rows(raw[y], vc.plus_idx, fulldim + etap + etam, fulldim, etap);
  }
  return smooth_frames(base, emb);
}

CanonicalLinkResult canonical_link_impl(
    const VcPath& path, const SuitableData& s0, const SuitableData& s1,
    const std::function<Eigen::MatrixXcd(long, double)>& psi_t, int lambda_rank,
    const std::function<Eigen::MatrixXcd(long)>& phi_fn, const FamiliesOptions& opt) {
  const TorusChart base = path.fib.base();
  const long nb = base.npts();
  const int T = opt.transport_steps;

  AugmentedSetup setup;
  setup.s0 = &s0;
  setup.s1 = &s1;
  setup.psi_override = psi_t;
  setup.eta0p = s0.eta_plus;
  setup.eta0m = s0.eta_minus;
  setup.eta1p = s1.eta_plus;
  setup.eta1m = s1.eta_minus;
  setup.vcs.reserve(T + 1);
  for (int q = 0; q <= T; ++q)
    setup.vcs.push_back(
        build_vertical_complex(path.fib, path.conn_at(static_cast<double>(q) / T), path.K));
  setup.plus_core = static_cast<long>(setup.vcs[0].plus_idx.size());
  setup.minus_core = static_cast<long>(setup.vcs[0].minus_idx.size());
  const long M = setup.mdim();
  const long P = setup.pdim();

  // surjectivity augmentation phi : lambda -> (E- + eta-)
  Eigen::MatrixXcd phi;
  int retries = 0;
  if (!phi_fn) {
    int deficiency = 0;
    const long ystep = std::max<long>(1, nb / 8);
    for (long y = 0; y < nb; y += ystep)
      for (int q = 0; q <= T; q += std::max(1, T / 4)) {
        Eigen::MatrixXcd a = setup.dplus(y, q);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
        const auto& s = svd.singularValues();
        const double thr = 1e-7 * std::max(s.size() ? s.maxCoeff() : 0.0, 1.0);
        int rank = 0;
        for (int i = 0; i < s.size(); ++i)
          if (s[i] > thr) ++rank;
        deficiency = std::max(deficiency, static_cast<int>(M) - rank);
      }
    Rng rng(opt.seed);
    bool ok = false;
    int lam = deficiency;
    int attempt = 0;
    for (attempt = 0; attempt <= opt.max_retries && !ok; ++attempt) {
      lam = deficiency + attempt;
      phi = Eigen::MatrixXcd(M, lam);
      for (long i = 0; i < M; ++i)
        for (int j = 0; j < lam; ++j) phi(i, j) = rng.uniform_complex();
      ok = true;
      for (long y = 0; y < nb && ok; ++y)
        for (int q = 0; q <= T && ok; ++q) {
          Eigen::MatrixXcd a(M, P + lam);
          a.leftCols(P) = setup.dplus(y, q);
          a.rightCols(lam) = phi;
          if (min_singular_estimate(a) <= opt.sv_tol) ok = false;
        }
    }
    if (!ok) throw AugmentationFailed("could not reach uniform surjectivity");
    lambda_rank = lam;
    retries = attempt - 1;
  }
  const int lam = lambda_rank;
  auto phi_at = [&](long y) { return phi_fn ? phi_fn(y) : phi; };
  auto aug = [&](long y, int q) {
    Eigen::MatrixXcd a(M, P + lam);
    a.leftCols(P) = setup.dplus(y, q);
    a.rightCols(lam) = phi_at(y);
    return a;
  };
  if (phi_fn) {
    for (long y = 0; y < nb; ++y)
      for (int q = 0; q <= T; q += std::max(1, T / 8))
        if (min_singular_estimate(aug(y, q)) <= opt.sv_tol)
          throw AugmentationFailed("explicit augmentation not uniformly surjective");
  }

  const long gdim = P + lam - M;
  if (gdim <= 0) throw Error("augmented kernel bundle has nonpositive rank");

  auto g_frames = [&](int q) {
    std::vector<Eigen::MatrixXcd> raw(nb);
    for (long y = 0; y < nb; ++y)
      raw[y] = kernel_basis(aug(y, q), 1e-7, static_cast<int>(gdim));
    return smooth_frames(base, raw);
  };
  FrameField g0 = g_frames(0);
  FrameField g1 = g_frames(T);
  // interval transport of the kernel bundle by projector sweeps
  std::vector<Eigen::MatrixXcd> transport(nb);
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd f = g0.F[y];
    for (int q = 1; q <= T; ++q) f = orthonormalize(kernel_project(aug(y, q), f));
    transport[y] = g1.F[y].adjoint() * f;
  }

  CanonicalLinkResult res;
  res.h0_plus = kernel_frames_svd(base, setup, 0, false);
  res.h0_minus = kernel_frames_svd(base, setup, 0, true);
  res.h1_plus = kernel_frames_svd(base, setup, T, false);
  res.h1_minus = kernel_frames_svd(base, setup, T, true);
  res.eta_plus = setup.eta0p + setup.eta1p;
  res.eta_minus = setup.eta0m + setup.eta1m;
  res.augmentation_rank = lam;
  res.augmentation_retries = retries;

  // exact sequence 0 -> H+ -> G -> lambda -> H- -> 0 at both ends
  auto end_link = [&](int q, const FrameField& g, const FrameField& hp_full,
                      const FrameField& hm_full) {
    const int rH = hp_full.r, rM = hm_full.r;
    MatrixField a(static_cast<int>(gdim), rH, nb);
    MatrixField b(lam, static_cast<int>(gdim), nb);
    MatrixField c(rM, lam, nb);
    const VerticalComplex& vc = setup.vcs[q];
    const long fulldim = vc.basis.dim();
    const long etap = setup.eta0p + setup.eta1p;
    for (long y = 0; y < nb; ++y) {
      Eigen::MatrixXcd hpc(P, rH);
      for (long i = 0; i < setup.plus_core; ++i) hpc.row(i) = hp_full.F[y].row(vc.plus_idx[i]);
      hpc.bottomRows(P - setup.plus_core) = hp_full.F[y].middleRows(fulldim, P - setup.plus_core);
      Eigen::MatrixXcd hmc(M, rM);
      for (long i = 0; i < setup.minus_core; ++i) hmc.row(i) = hm_full.F[y].row(vc.minus_idx[i]);
      hmc.bottomRows(M - setup.minus_core) =
          hm_full.F[y].middleRows(fulldim + etap, M - setup.minus_core);
      Eigen::MatrixXcd emb = Eigen::MatrixXcd::Zero(P + lam, rH);
      emb.topRows(P) = hpc;
      a.set_point(y, (g.F[y].adjoint() * emb).eval());
      b.set_point(y, g.F[y].bottomRows(lam).eval());
      c.set_point(y, (hmc.adjoint() * phi_at(y)).eval());
    }
    return link_from_exact_sequence(base, a, b, c);
  };
  LinkDatum l0 = end_link(0, g0, res.h0_plus, res.h0_minus);
  LinkDatum l1 = end_link(T, g1, res.h1_plus, res.h1_minus);

  MatrixField mid(static_cast<int>(lam + gdim), static_cast<int>(gdim + lam), nb);
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(lam + gdim, gdim + lam);
    m.topRightCorner(lam, lam) = Eigen::MatrixXcd::Identity(lam, lam);
    m.bottomLeftCorner(gdim, gdim) = transport[y];
    mid.set_point(y, m);
  }
  LinkDatum lmid =
      LinkDatum::make(base, static_cast<int>(gdim), lam, static_cast<int>(gdim), lam, 0, mid);

  res.link = compose_links(compose_links(l0, lmid), invert_link(l1));
  return res;
}

}  // namespace

CanonicalLinkResult canonical_link(const VcPath& path, const SuitableData& s0,
                                   const SuitableData& s1, const FamiliesOptions& opt) {
  return canonical_link_impl(path, s0, s1, nullptr, -1, nullptr, opt);
}

CanonicalLinkResult canonical_link_explicit(
    const VcPath& path, const SuitableData& s0, const SuitableData& s1,
    const std::function<Eigen::MatrixXcd(long, double)>& psi_t, int lambda_rank,
    const std::function<Eigen::MatrixXcd(long)>& phi, const FamiliesOptions& opt) {
  return canonical_link_impl(path, s0, s1, psi_t, lambda_rank, phi, opt);
}

RelDirectImage direct_image_rel(const TorusFibration& fib, const RelKGenerator& g, int K,
                                const FamiliesOptions& opt) {
  Connection c0 = g.e;
  Connection c1 = pullback(g.f_conn, g.f);
  VcPath path{fib, K, [&](double t) {
                Connection c;
                c.chart = fib.total;
                c.rank = c0.rank;
                c.coeff = Complex(1 - t, 0) * c0.coeff + Complex(t, 0) * c1.coeff;
                return c;
              }};
  SuitableData none;
  CanonicalLinkResult res = canonical_link(path, none, none, opt);

  RelDirectImage out;
  out.link = res.link;
  VerticalComplex vc0 = build_vertical_complex(fib, c0, path.K);
  VerticalComplex vc1 = build_vertical_complex(fib, c1, path.K);
  out.e_side.kernels = HarmonicKernels{res.h0_plus, res.h0_minus};
  out.e_side.gm_plus = gauss_manin(vc0, res.h0_plus);
  out.e_side.gm_minus = gauss_manin(vc0, res.h0_minus);
  out.f_side.kernels = HarmonicKernels{res.h1_plus, res.h1_minus};
  out.f_side.gm_plus = gauss_manin(vc1, res.h1_plus);
  out.f_side.gm_minus = gauss_manin(vc1, res.h1_minus);

  const TorusChart base = fib.base();
  Connection stab = Connection::trivial(base, res.link.k);
  Connection e_part = direct_sum(direct_sum(out.e_side.gm_plus, out.f_side.gm_minus), stab);
  Connection f_part = direct_sum(direct_sum(out.e_side.gm_minus, out.f_side.gm_plus), stab);
  out.generator = RelKGenerator::make(e_part, f_part, res.link.ell);
  return out;
}

PiLeftResult pi_left(const TorusFibration& fib, const Connection& flat_total, int K,
                     const FamiliesOptions& opt) {
  if (fib.fiber_dim % 2 == 0) throw Error("pi_left needs an odd-dimensional fiber");
  Connection c = flat_total.metric ? flat_total : flat_total.with_identity_metric();
  Connection cstar = adjoint_connection(c);
  const TorusChart base = fib.base();
  const long nb = base.npts();
  const int T = opt.transport_steps;

  std::vector<VerticalComplex> vcs;
  vcs.reserve(T + 1);
  for (int q = 0; q <= T; ++q) {
    const double t = static_cast<double>(q) / T;
    Connection ct;
    ct.chart = fib.total;
    ct.rank = c.rank;
    ct.coeff = Complex(1 - t, 0) * c.coeff + Complex(t, 0) * cstar.coeff;
    vcs.push_back(build_vertical_complex(fib, ct, K));
  }

  HarmonicKernels h0 = harmonic_kernels(vcs[0]);
  HarmonicKernels h1 = harmonic_kernels(vcs[T]);
  if (h0.plus.r != h0.minus.r)
    throw DimensionJump("odd fiber should pair plus and minus kernels");

  // transport of the minus kernels along t per base point
  std::vector<Eigen::MatrixXcd> tminus(nb);
  for (long y = 0; y < nb; ++y) {
    std::vector<Eigen::MatrixXcd> chain;
    chain.push_back(h0.minus.F[y]);
    for (int q = 1; q < T; ++q) {
      Eigen::MatrixXcd dp = vcs[q].dirac_plus(y);
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(dp, Eigen::ComputeFullU);
      const auto& s = svd.singularValues();
      const double thr = 1e-7 * std::max(s.size() ? s.maxCoeff() : 0.0, 1.0);
      int rank = 0;
      for (int i = 0; i < s.size(); ++i)
        if (s[i] > thr) ++rank;
      const int k = static_cast<int>(dp.rows()) - rank;
      if (k != h0.minus.r) throw DimensionJump("kernel dimension varies along the path");
      chain.push_back(
          embed_rows(svd.matrixU().rightCols(k), vcs[q].minus_idx, vcs[q].basis.dim(), 0, 0));
    }
    chain.push_back(h1.minus.F[y]);
    tminus[y] = ordered_transport(chain);
  }

  // *_Z maps the t=0 plus kernels onto the t=1 minus kernels
  Eigen::MatrixXcd star = fiber_hodge_star(vcs[0]);
  MatrixField iso(h0.minus.r, h0.plus.r, nb);
  for (long y = 0; y < nb; ++y) {
    Eigen::MatrixXcd s = h1.minus.F[y].adjoint() * star * h0.plus.F[y];
    iso.set_point(y, (tminus[y].inverse() * s).eval());
  }
  if (iso.min_singular() < 1e-6) throw Error("odd-fiber pairing failed to be invertible");

  PiLeftResult out;
  out.image.kernels = h0;
  out.image.gm_plus = gauss_manin(vcs[0], h0.plus);
  out.image.gm_minus = gauss_manin(vcs[0], h0.minus);
  out.iso = iso;
  // generator (pi- E, pi+ E, ...) with the role-swapped isomorphism
  out.generator = RelKGenerator::make(out.image.gm_minus, out.image.gm_plus, iso.inverse());
  return out;
}

}  // namespace cwb
