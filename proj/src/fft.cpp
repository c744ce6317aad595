// SPDX-License-Identifier: Apache-2.0
#include "skybeam/fft.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace skybeam::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

// Iterative radix-2 with a precomputed twiddle table (forward sign).
struct Pow2Plan {
  int n = 0;
  std::vector<int> rev;
  std::vector<std::complex<double>> tw;  // tw[k] = exp(-2*pi*i*k/n), k < n/2

  explicit Pow2Plan(int n_) : n(n_), rev(static_cast<size_t>(n_)) {
    int lg = 0;
    while ((1 << lg) < n) ++lg;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < lg; ++b) r |= ((i >> b) & 1) << (lg - 1 - b);
      rev[static_cast<size_t>(i)] = r;
    }
    tw.resize(static_cast<size_t>(n / 2 > 0 ? n / 2 : 1));
    for (int k = 0; k < n / 2; ++k) {
      const double a = -kTwoPi * k / n;
      tw[static_cast<size_t>(k)] = {std::cos(a), std::sin(a)};
    }
  }

  void run(std::complex<double>* a, bool inverse) const {
    for (int i = 0; i < n; ++i) {
      const int r = rev[static_cast<size_t>(i)];
      if (i < r) std::swap(a[i], a[r]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      const int half = len >> 1;
      const int step = n / len;
      for (int base = 0; base < n; base += len) {
        for (int k = 0; k < half; ++k) {
          std::complex<double> w = tw[static_cast<size_t>(k * step)];
          if (inverse) w = std::conj(w);
          const std::complex<double> u = a[base + k];
          const std::complex<double> t = a[base + k + half] * w;
          a[base + k] = u + t;
          a[base + k + half] = u - t;
        }
      }
    }
    if (inverse) {
      const double s = 1.0 / n;
      for (int i = 0; i < n; ++i) a[i] *= s;
    }
  }
};

// Bluestein reduction: x_k * c_k convolved against conj(c) via a power-of-two
// transform, then re-chirped. Phases use k^2 mod 2n to keep arguments small.
struct BluesteinPlan {
  int n = 0;
  int m = 0;
  std::vector<std::complex<double>> chirp;    // c_k = exp(-i*pi*k^2/n)
  std::vector<std::complex<double>> kernel_f; // fft of padded conj-chirp
  const Pow2Plan* inner = nullptr;

  BluesteinPlan(int n_, const Pow2Plan* plan_m) : n(n_), inner(plan_m) {
    m = plan_m->n;
    chirp.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      const long q = (static_cast<long>(k) * k) % (2L * n);
      const double a = -kTwoPi * 0.5 * static_cast<double>(q) / n;
      chirp[static_cast<size_t>(k)] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> b(static_cast<size_t>(m), {0.0, 0.0});
    b[0] = std::conj(chirp[0]);
    for (int k = 1; k < n; ++k) {
      b[static_cast<size_t>(k)] = std::conj(chirp[static_cast<size_t>(k)]);
      b[static_cast<size_t>(m - k)] = std::conj(chirp[static_cast<size_t>(k)]);
    }
    inner->run(b.data(), false);
    kernel_f = std::move(b);
  }

  void run(std::complex<double>* x, bool inverse) const {
    // The inverse transform is conj(forward(conj(x)))/n, which reuses the
    // forward chirp and kernel unchanged.
    if (inverse) {
      for (int k = 0; k < n; ++k) x[k] = std::conj(x[k]);
      run_forward(x);
      const double s = 1.0 / n;
      for (int k = 0; k < n; ++k) x[k] = std::conj(x[k]) * s;
      return;
    }
    run_forward(x);
  }

  void run_forward(std::complex<double>* x) const {
    std::vector<std::complex<double>> a(static_cast<size_t>(m), {0.0, 0.0});
    for (int k = 0; k < n; ++k) a[static_cast<size_t>(k)] = x[k] * chirp[static_cast<size_t>(k)];
    inner->run(a.data(), false);
    for (int k = 0; k < m; ++k) a[static_cast<size_t>(k)] *= kernel_f[static_cast<size_t>(k)];
    inner->run(a.data(), true);
    for (int k = 0; k < n; ++k) x[k] = a[static_cast<size_t>(k)] * chirp[static_cast<size_t>(k)];
  }
};

struct PlanCache {
  std::map<int, Pow2Plan> pow2;
  std::map<int, BluesteinPlan> blue;

  const Pow2Plan& get_pow2(int n) {
    auto it = pow2.find(n);
    if (it == pow2.end()) it = pow2.emplace(n, Pow2Plan(n)).first;
    return it->second;
  }

  void run(std::complex<double>* a, int n, bool inverse) {
    if (n == 1) return;
    if (is_pow2(n)) {
      get_pow2(n).run(a, inverse);
      return;
    }
    auto it = blue.find(n);
    if (it == blue.end()) {
      const Pow2Plan& inner = get_pow2(next_pow2(2 * n - 1));
      it = blue.emplace(n, BluesteinPlan(n, &inner)).first;
    }
    it->second.run(a, inverse);
  }
};

PlanCache& cache() {
  thread_local PlanCache c;
  return c;
}

}  // namespace

void transform(std::vector<std::complex<double>>& a, bool inverse) {
  if (a.empty()) throw std::invalid_argument("fft: empty input");
  cache().run(a.data(), static_cast<int>(a.size()), inverse);
}

void transform2d(double* re, double* im, int h, int w, bool inverse) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("fft: non-positive extent");
  std::vector<std::complex<double>> buf(static_cast<size_t>(std::max(h, w)));
  for (int r = 0; r < h; ++r) {
    double* pr = re + static_cast<size_t>(r) * w;
    double* pi = im + static_cast<size_t>(r) * w;
    for (int c = 0; c < w; ++c) buf[static_cast<size_t>(c)] = {pr[c], pi[c]};
    cache().run(buf.data(), w, inverse);
    for (int c = 0; c < w; ++c) {
      pr[c] = buf[static_cast<size_t>(c)].real();
      pi[c] = buf[static_cast<size_t>(c)].imag();
    }
  }
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) {
      const size_t idx = static_cast<size_t>(r) * w + c;
      buf[static_cast<size_t>(r)] = {re[idx], im[idx]};
    }
    cache().run(buf.data(), h, inverse);
    for (int r = 0; r < h; ++r) {
      const size_t idx = static_cast<size_t>(r) * w + c;
      re[idx] = buf[static_cast<size_t>(r)].real();
      im[idx] = buf[static_cast<size_t>(r)].imag();
    }
  }
}

}  // namespace skybeam::fft
