#include "cwb/random.hpp"

#include <functional>
#include <map>

#include <unsupported/Eigen/MatrixFunctions>

namespace cwb {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state) w = splitmix64(s);
}

// xoshiro256**
std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state[1] * 5, 7) * 9;
  const std::uint64_t t = state[1] << 17;
  state[2] ^= state[0];
  state[3] ^= state[1];
  state[1] ^= state[2];
  state[0] ^= state[3];
  state[2] ^= t;
  state[3] = rotl(state[3], 45);
  return result;
}

double Rng::uniform() {
  return 2.0 * (static_cast<double>(next_u64() >> 11) * 0x1.0p-53) - 1.0;
}

Complex Rng::uniform_complex() {
  const double re = uniform();
  const double im = uniform();
  return Complex(re, im);
}

int Rng::uniform_int(int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(next_u64() % span);
}

namespace {

// Iterate modes with |k_a| <= band on each active axis.
void for_modes(const TorusChart& chart, int band,
               const std::function<void(const std::array<int, 4>&)>& fn) {
  std::array<int, 4> k{0, 0, 0, 0};
  const int lo = -band, hi = band;
  std::function<void(int)> rec = [&](int axis) {
    if (axis == chart.dim) {
      fn(k);
      return;
    }
    for (int v = lo; v <= hi; ++v) {
      k[axis] = v;
      rec(axis + 1);
    }
  };
  rec(0);
}

}  // namespace

Scal random_band_limited(Rng& rng, const TorusChart& chart, int band, double amplitude,
                         bool real) {
  for (int a = 0; a < chart.dim; ++a)
    if (2 * band >= chart.n[a]) throw BandLimitExceeded("grid too small for band");
  // fill Fourier coefficients, then synthesize by inverse FFT
  Scal hat = Scal::Zero(chart.npts());
  std::map<long, Complex> coef;
  for_modes(chart, band, [&](const std::array<int, 4>& k) {
    std::array<int, 4> j{0, 0, 0, 0};
    for (int a = 0; a < chart.dim; ++a) j[a] = (k[a] >= 0) ? k[a] : k[a] + chart.n[a];
    coef[chart.flat_index(j)] = amplitude * rng.uniform_complex();
  });
  if (real) {
    // enforce conjugate symmetry c_{-k} = conj(c_k)
    for_modes(chart, band, [&](const std::array<int, 4>& k) {
      std::array<int, 4> j{0, 0, 0, 0}, jneg{0, 0, 0, 0};
      for (int a = 0; a < chart.dim; ++a) {
        j[a] = (k[a] >= 0) ? k[a] : k[a] + chart.n[a];
        jneg[a] = (k[a] <= 0) ? -k[a] : chart.n[a] - k[a];
      }
      const long p = chart.flat_index(j), q = chart.flat_index(jneg);
      if (p < q) {
        const Complex c = coef[p];
        coef[q] = std::conj(c);
      } else if (p == q) {
        coef[p] = Complex(coef[p].real(), 0.0);
      }
    });
  }
  for (const auto& [p, c] : coef) hat[p] = c * static_cast<double>(chart.npts());
  fft_inverse(chart, hat);
  if (real)
    for (long p = 0; p < hat.size(); ++p) hat[p] = Complex(hat[p].real(), 0.0);
  return hat;
}

MatrixField random_matrix_field(Rng& rng, const TorusChart& chart, int rank, int band,
                                double amplitude, bool real) {
  MatrixField m(rank, rank, chart.npts());
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < rank; ++j)
      m.at(i, j) = random_band_limited(rng, chart, band, amplitude, real);
  return m;
}

Form random_one_form(Rng& rng, const TorusChart& chart, int rank, int band, double amplitude,
                     bool real) {
  Form f = Form::zero(chart, rank);
  for (int axis = 0; axis < chart.dim; ++axis)
    f.comp.emplace(static_cast<Subset>(1u << axis),
                   random_matrix_field(rng, chart, rank, band, amplitude, real));
  return f;
}

MatrixField random_metric(Rng& rng, const TorusChart& chart, int rank, int band,
                          double amplitude) {
  MatrixField b = random_matrix_field(rng, chart, rank, band, 1.0);
  MatrixField sym = b + b.adjoint();
  // scale so the spectral norm stays below `amplitude` everywhere
  sym *= Complex(amplitude / (sym.max_abs() * rank), 0.0);
  MatrixField h = MatrixField::identity(rank, chart.npts());
  h += sym;
  if (h.min_eig_hermitian() < 0.25) throw Error("random metric not positive definite");
  return h;
}

MatrixField field_exp(const MatrixField& x) {
  MatrixField g(x.rows, x.cols, x.npts);
  for (long p = 0; p < x.npts; ++p) {
    const Eigen::MatrixXcd m = x.point(p);
    g.set_point(p, m.exp());
  }
  return g;
}

MatrixField random_invertible(Rng& rng, const TorusChart& chart, int rank, int band,
                              double amplitude) {
  return field_exp(random_matrix_field(rng, chart, rank, band, amplitude / rank));
}

}  // namespace cwb
