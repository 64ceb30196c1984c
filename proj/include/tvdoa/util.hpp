#pragma once
// Shared numeric utilities: angle arithmetic on the circle, deterministic
// random number generation, line fitting, quadrature nodes, root finding.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvdoa {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, two_pi);
  if (a <= -pi) a += two_pi;
  if (a > pi) a -= two_pi;
  return a;
}

// Geodesic (great-circle) distance between two angles, in [0, pi].
inline double angular_distance(double a, double b) {
  return std::abs(wrap_angle(a - b));
}

// Weighted circular mean; weights must be nonnegative with positive sum.
inline double circular_mean(const std::vector<double>& angles,
                            const std::vector<double>& weights) {
  if (angles.empty() || angles.size() != weights.size())
    throw std::invalid_argument("circular_mean: bad sizes");
  cplx z{0.0, 0.0};
  for (std::size_t i = 0; i < angles.size(); ++i)
    z += weights[i] * std::polar(1.0, angles[i]);
  if (std::abs(z) == 0.0)
    throw std::invalid_argument("circular_mean: degenerate weight sum");
  return std::arg(z);
}

// sinc(x) = sin(x)/x with the removable singularity filled in.
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------
// std::normal_distribution is implementation-defined; Box-Muller on top of
// mt19937_64 gives bit-identical streams on every platform.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return (eng_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Circularly-symmetric complex normal with E|z|^2 = 1.
  cplx cnormal() {
    const double re = normal();
    const double im = normal();
    return {re / std::sqrt(2.0), im / std::sqrt(2.0)};
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 step; used to derive independent per-trial seeds from
// (base seed, trial index) so concurrent trials get disjoint streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Least-squares line fit (for log-log slope estimates)
// ---------------------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: bad sizes");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  if (n > 2) f.slope_stderr = std::sqrt(ss_res / double(n - 2) / sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [a, b]
// ---------------------------------------------------------------------------

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes/weights by Newton iteration on P_n; accurate to machine precision
// for the modest orders used here.
inline Quadrature gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const int mhalf = (n + 1) / 2;
  for (int i = 0; i < mhalf; ++i) {
    // Chebyshev-based initial guess.
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    q.nodes[i] = x;
    q.weights[i] = w;
    q.nodes[n - 1 - i] = -x;
    q.weights[n - 1 - i] = w;
  }
  // Map from [-1, 1] to [a, b].
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    q.nodes[i] = c + h * q.nodes[i];
    q.weights[i] *= h;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Bisection root finder for monotone functions
// ---------------------------------------------------------------------------

template <class F>
double bisect(F&& f, double lo, double hi, double tol = 1e-14,
              int max_iter = 200) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw std::invalid_argument("bisect: no sign change on bracket");
  for (int i = 0; i < max_iter && (hi - lo) > tol * std::max(1.0, std::abs(hi));
       ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace tvdoa
