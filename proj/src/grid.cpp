#include "cwb/grid.hpp"

#include <unsupported/Eigen/FFT>

namespace cwb {

TorusChart TorusChart::make(std::initializer_list<int> sizes) {
  return make(std::vector<int>(sizes));
}

TorusChart TorusChart::make(const std::vector<int>& sizes) {
  TorusChart c;
  if (sizes.size() < 1 || sizes.size() > 4) throw Error("chart dim must be 1..4");
  c.dim = static_cast<int>(sizes.size());
  c.n = {1, 1, 1, 1};
  for (int a = 0; a < c.dim; ++a) {
    if (sizes.begin()[a] < 4) throw Error("grid size must be >= 4 per coordinate");
    c.n[a] = sizes.begin()[a];
  }
  return c;
}

Scal TorusChart::coordinate(int axis) const {
  Scal x(npts());
  const long s = stride(axis);
  const int na = n[axis];
  const double h = kTwoPi / na;
  for (long p = 0; p < npts(); ++p) {
    const int j = static_cast<int>((p / s) % na);
    x[p] = Complex(j * h, 0.0);
  }
  return x;
}

std::vector<double> TorusChart::wavenumbers(int axis) const {
  const int na = n[axis];
  std::vector<double> k(na);
  for (int j = 0; j < na; ++j) k[j] = (j <= (na - 1) / 2) ? j : j - na;
  return k;
}

long TorusChart::flat_index(const std::array<int, 4>& j) const {
  long p = 0;
  for (int a = dim - 1; a >= 0; --a) p = p * n[a] + j[a];
  return p;
}

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 FFT over the "rows" of a slab: row j is the contiguous
// range data[j*s .. j*s+s); every butterfly streams whole rows, which keeps
// the transform memory-friendly for strided axes.
void fft_rows_pow2(Complex* data, int na, long s, bool forward) {
  using Row = Eigen::Map<Eigen::ArrayXcd>;
  // bit reversal
  for (int i = 1, j = 0; i < na; ++i) {
    int bit = na >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) Row(data + i * s, s).swap(Row(data + static_cast<long>(j) * s, s));
  }
  Eigen::ArrayXcd tmp(s);
  for (int m = 2; m <= na; m <<= 1) {
    const double ang = (forward ? -1.0 : 1.0) * kTwoPi / m;
    const Complex wm(std::cos(ang), std::sin(ang));
    for (int k = 0; k < na; k += m) {
      Complex w(1.0, 0.0);
      for (int j = 0; j < m / 2; ++j) {
        Row u(data + static_cast<long>(k + j) * s, s);
        Row v(data + static_cast<long>(k + j + m / 2) * s, s);
        tmp = v * w;
        v = u - tmp;
        u += tmp;
        w *= wm;
      }
    }
  }
  if (!forward) {
    const double scale = 1.0 / na;
    Row(data, static_cast<long>(na) * s) *= scale;
  }
}

// Apply a per-mode multiplier along one axis.
void axis_apply(const TorusChart& chart, Scal& f, int axis,
                const std::vector<Complex>& multiplier) {
  const int na = chart.n[axis];
  const long s = chart.stride(axis);
  const long npts = chart.npts();
  if (is_pow2(na) && s >= 8) {
    const long slab = s * na;
    for (long hi = 0; hi < npts / slab; ++hi) {
      Complex* base = f.data() + hi * slab;
      fft_rows_pow2(base, na, s, true);
      for (int j = 0; j < na; ++j)
        Eigen::Map<Eigen::ArrayXcd>(base + static_cast<long>(j) * s, s) *= multiplier[j];
      fft_rows_pow2(base, na, s, false);
    }
    return;
  }
  static thread_local Eigen::FFT<double> fft;
  const long nlines = npts / na;
  std::vector<Complex> line(na), hat(na);
  for (long l = 0; l < nlines; ++l) {
    // base index of this line: insert axis coordinate 0 at position `axis`
    const long lo = l % s;
    const long hi = l / s;
    const long base = lo + hi * s * na;
    for (int j = 0; j < na; ++j) line[j] = f[base + j * s];
    fft.fwd(hat, line);
    for (int j = 0; j < na; ++j) hat[j] *= multiplier[j];
    fft.inv(line, hat);
    for (int j = 0; j < na; ++j) f[base + j * s] = line[j];
  }
}

}  // namespace

Scal spectral_derivative(const TorusChart& chart, const Scal& f, int axis) {
  const int na = chart.n[axis];
  auto k = chart.wavenumbers(axis);
  std::vector<Complex> mult(na);
  for (int j = 0; j < na; ++j) mult[j] = Complex(0.0, k[j]);
  if (na % 2 == 0) mult[na / 2] = Complex(0.0, 0.0);  // drop Nyquist
  Scal g = f;
  axis_apply(chart, g, axis, mult);
  return g;
}

Complex grid_mean(const Scal& f) {
  Complex s(0.0, 0.0);
  for (long p = 0; p < f.size(); ++p) s += f[p];
  return s / static_cast<double>(f.size());
}

Complex grid_integral(const TorusChart& chart, const Scal& f) {
  Complex s(0.0, 0.0);
  for (long p = 0; p < f.size(); ++p) s += f[p];
  return s * chart.cell_volume();
}

namespace {

void fft_all(const TorusChart& chart, Scal& f, bool forward) {
  static thread_local Eigen::FFT<double> fft;
  for (int axis = 0; axis < chart.dim; ++axis) {
    const int na = chart.n[axis];
    const long s = chart.stride(axis);
    if (is_pow2(na) && s >= 8) {
      const long slab = s * na;
      for (long hi = 0; hi < chart.npts() / slab; ++hi)
        fft_rows_pow2(f.data() + hi * slab, na, s, forward);
      continue;
    }
    const long nlines = chart.npts() / na;
    std::vector<Complex> line(na), hat(na);
    for (long l = 0; l < nlines; ++l) {
      const long lo = l % s;
      const long hi = l / s;
      const long base = lo + hi * s * na;
      for (int j = 0; j < na; ++j) line[j] = f[base + j * s];
      if (forward)
        fft.fwd(hat, line);
      else
        fft.inv(hat, line);
      for (int j = 0; j < na; ++j) f[base + j * s] = hat[j];
    }
  }
}

}  // namespace

void fft_forward(const TorusChart& chart, Scal& f) { fft_all(chart, f, true); }
void fft_inverse(const TorusChart& chart, Scal& f) { fft_all(chart, f, false); }

}  // namespace cwb
