#pragma once
// Trigonometric-polynomial approximation of the steering lag responses and
// the Gamma tensor tying dual matrices to polynomial coefficients.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "tvdoa/geometry.hpp"
#include "tvdoa/measurement.hpp"
#include "tvdoa/util.hpp"

namespace tvdoa {

// ---------------------------------------------------------------------------
// Trigonometric polynomials
// ---------------------------------------------------------------------------

struct TrigPoly {
  int L = 0;
  Eigen::VectorXcd coeffs;  // coeffs(i) is the coefficient of e^{i n w}, n=i-L

  TrigPoly() = default;
  explicit TrigPoly(int L_) : L(L_), coeffs(Eigen::VectorXcd::Zero(2 * L_ + 1)) {}

  cplx coeff(int n) const { return coeffs(n + L); }
  void set_coeff(int n, cplx v) { coeffs(n + L) = v; }

  cplx eval(double w) const {
    // Horner in e^{iw} on the shifted polynomial e^{iLw} q = sum c_j e^{ijw}.
    const cplx z = std::polar(1.0, w);
    cplx acc{0.0, 0.0};
    for (int j = 2 * L; j >= 0; --j) acc = acc * z + coeffs(j);
    return acc * std::polar(1.0, -L * w);
  }

  // Real-valued polynomials have conjugate-reflective coefficients.
  bool conjugate_reflective(double tol = 1e-12) const {
    for (int n = 0; n <= L; ++n)
      if (std::abs(coeff(-n) - std::conj(coeff(n))) > tol) return false;
    return true;
  }
};

enum class ApproxMode { truncated, cesaro };

inline std::string to_string(ApproxMode m) {
  return m == ApproxMode::cesaro ? "cesaro" : "truncated";
}

// ---------------------------------------------------------------------------
// Fourier coefficients of the plane-wave lag response
// ---------------------------------------------------------------------------

namespace detail {

// Signed-order Bessel J_n with the reflection J_{-n} = (-1)^n J_n.
inline double bessel_j(int n, double x) {
  const int a = std::abs(n);
  double v = std::cyl_bessel_j(a, std::abs(x));
  if (x < 0 && (a % 2)) v = -v;          // J_n(-x) = (-1)^n J_n(x)
  if (n < 0 && (a % 2)) v = -v;
  return v;
}

// Trapezoidal quadrature of the coefficient integral; also the oracle path
// used for very large lags where the Bessel evaluation is less trusted.
inline cplx fourier_coeff_quadrature(const Vec2& d, int n, int nodes = 4096) {
  cplx acc{0.0, 0.0};
  for (int i = 0; i < nodes; ++i) {
    const double w = two_pi * i / nodes;
    acc += steering(d, w) * std::polar(1.0, -n * w);
  }
  return acc / double(nodes);
}

}  // namespace detail

// Coefficient n of epsilon_d(w) = exp(i(cos w d1 + sin w d2)):
// i^n J_n(|d|) e^{-i n atan2(d2, d1)} (Jacobi-Anger expansion).
inline Eigen::VectorXcd plane_wave_fourier_coeffs(const Vec2& d, int L) {
  Eigen::VectorXcd c(2 * L + 1);
  const double r = d.norm();
  if (r < 1e-300) {
    c.setZero();
    c(L) = 1.0;
    return c;
  }
  const double psi = std::atan2(d.y(), d.x());
  const bool fallback = r > 30.0;  // quadrature fallback for large lags
  for (int n = -L; n <= L; ++n) {
    if (fallback) {
      c(n + L) = detail::fourier_coeff_quadrature(d, n);
    } else {
      const cplx in = std::polar(1.0, n * pi / 2.0);  // i^n
      c(n + L) = in * detail::bessel_j(n, r) * std::polar(1.0, -n * psi);
    }
  }
  return c;
}

// Truncated or Cesaro-weighted approximation of epsilon_d by a degree-L
// trigonometric polynomial.
inline TrigPoly build_rho(const Vec2& d, int L, ApproxMode mode) {
  if (L < 1) throw Error("invalid-degree", "L >= 1 required");
  TrigPoly p(L);
  p.coeffs = plane_wave_fourier_coeffs(d, L);
  if (mode == ApproxMode::cesaro) {
    for (int n = -L; n <= L; ++n)
      p.coeffs(n + L) *= 1.0 - double(std::abs(n)) / double(L + 1);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Gamma tensor
// ---------------------------------------------------------------------------

struct GammaTensor {
  int L = 0;
  int m = 0;
  ApproxMode mode = ApproxMode::truncated;
  // G(i, k + l*m) = coefficient n = i-L of rho_{k,l} (lag position_k -
  // position_l). Column layout matches vec() of an m x m matrix.
  Eigen::MatrixXcd G;

  int pair_index(int k, int l) const { return k + l * m; }
};

// One column per antenna pair.
inline GammaTensor build_gamma(const ArrayDesign& design, int L,
                               ApproxMode mode = ApproxMode::truncated) {
  GammaTensor g;
  g.L = L;
  g.m = design.m;
  g.mode = mode;
  g.G.resize(2 * L + 1, design.m * design.m);
  for (int l = 0; l < design.m; ++l) {
    for (int k = 0; k < design.m; ++k) {
      const TrigPoly rho =
          build_rho(design.positions[k] - design.positions[l], L, mode);
      g.G.col(g.pair_index(k, l)) = rho.coeffs;
    }
  }
  return g;
}

// Adjoint with the Frobenius pairing: coefficients of
// (M~* p)(w) = sum_{kl} conj(p_{kl}) rho_{kl}(w). For Hermitian p the result
// is real-valued; its peak locations are the candidate support.
inline TrigPoly apply_gamma(const GammaTensor& gamma, const CovMatrix& p) {
  if (p.rows() != gamma.m || p.cols() != gamma.m)
    throw Error("dimension-mismatch", "p must be m x m");
  TrigPoly q(gamma.L);
  const Eigen::VectorXcd pv =
      Eigen::Map<const Eigen::VectorXcd>(p.data(), p.size()).conjugate();
  q.coeffs = gamma.G * pv;
  return q;
}

// vec of the approximate atom M~(delta_theta): column stack of the matrix
// with entries rho_{kl}(theta).
inline Eigen::VectorXcd gamma_atom_vec(const GammaTensor& gamma, double theta) {
  Eigen::VectorXcd u(2 * gamma.L + 1);
  for (int n = -gamma.L; n <= gamma.L; ++n)
    u(n + gamma.L) = std::polar(1.0, n * theta);
  return gamma.G.transpose() * u;
}

// Approximate forward operator M~ applied to a spike measure.
inline CovMatrix gamma_forward(const GammaTensor& gamma,
                               const SpikeMeasure& mu) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(gamma.m * gamma.m);
  for (const auto& sp : mu.spikes)
    acc += sp.amp * gamma_atom_vec(gamma, sp.theta);
  return Eigen::Map<const CovMatrix>(acc.data(), gamma.m, gamma.m);
}

// Frobenius norm of (M - M~) mu: how much the trig approximation moves the
// measurement of a given measure.
inline double approx_operator_gap(const ArrayDesign& design,
                                  const GammaTensor& gamma,
                                  const SpikeMeasure& mu) {
  const CovMatrix exact = forward(design, mu);
  const CovMatrix approx = gamma_forward(gamma, mu);
  return (exact - approx).norm();
}

}  // namespace tvdoa
