#pragma once
// Executable recovery theory: the Fejer-based L2-normalized filter and its
// autocorrelation, plane-wave approximation of shifted autocorrelations over
// a covering (Riemann sum of the Fourier inversion), soft-certificate
// condition checks, and the main threshold/guarantee calculator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "tvdoa/geometry.hpp"
#include "tvdoa/measurement.hpp"
#include "tvdoa/util.hpp"

namespace tvdoa {

// ---------------------------------------------------------------------------
// Filter and autocorrelation
// ---------------------------------------------------------------------------

struct FilterSpec {
  int M = 16;     // Fejer order
  int k = 3;      // tail smoothness / anti-decay exponent
  int N_max = 0;  // coefficient truncation; 0 means the default 8M

  int n_max() const { return N_max > 0 ? N_max : 8 * M; }
  void validate() const {
    if (M < 3) throw Error("invalid-filter-spec", "M >= 3 required");
    if (k < 1) throw Error("invalid-filter-spec", "k >= 1 required");
    if (n_max() < 4 * M)
      throw Error("invalid-filter-spec", "N_max >= 4M required");
  }
};

// Normalized Fejer coefficients (1 - |n|/M)/M for |n| < M (zero at |n| = M),
// so the kernel value at 0 is exactly 1.
inline Eigen::VectorXd fejer_coeffs(int M) {
  if (M < 1) throw Error("invalid-filter-spec", "M >= 1 required");
  Eigen::VectorXd c(2 * M + 1);
  for (int n = -M; n <= M; ++n)
    c(n + M) = std::max(0.0, 1.0 - double(std::abs(n)) / M) / M;
  return c;
}

// Kernel evaluation from coefficients indexed -M..M.
inline double fejer_eval(const Eigen::VectorXd& coeffs, double w) {
  const int M = int((coeffs.size() - 1) / 2);
  double s = 0.0;
  for (int n = 1; n <= M; ++n) s += coeffs(n + M) * std::cos(n * w);
  return coeffs(M) + 2.0 * s;
}

// Truncated normalization constant Z = 1 + sum_{M<|n|<=N_max} |n|^{-2k}.
inline double filter_normalization(const FilterSpec& spec) {
  spec.validate();
  double tail = 0.0;
  for (int n = spec.n_max(); n > spec.M; --n)  // ascending terms
    tail += 2.0 * std::pow(double(n), -2.0 * spec.k);
  return 1.0 + tail;
}

// L2-normalized filter coefficients, indexed -N_max..N_max:
// sqrt(fejer(n)/Z) inside (0 at |n| = M), |n|^{-k}/sqrt(Z) on the tail.
inline Eigen::VectorXd filter_coeffs(const FilterSpec& spec) {
  spec.validate();
  const int N = spec.n_max();
  const double Z = filter_normalization(spec);
  const double sz = std::sqrt(Z);
  Eigen::VectorXd phi(2 * N + 1);
  for (int n = -N; n <= N; ++n) {
    const int a = std::abs(n);
    if (a <= spec.M)
      phi(n + N) = std::sqrt(
          std::max(0.0, 1.0 - double(a) / spec.M) / (spec.M * Z));
    else
      phi(n + N) = std::pow(double(a), -double(spec.k)) / sz;
  }
  return phi;
}

struct AutocorrSpec {
  int M = 0, k = 0, N_max = 0;
  double Z = 1.0;
  Eigen::VectorXd a_hat;  // size 2*N_max+1, index n + N_max; even, nonnegative

  // a(w) = a_hat(0) + 2 sum_{n>=1} a_hat(n) cos(n w). The zero coefficient is
  // compensated so that eval(0) returns exactly 1.
  double eval(double w) const {
    double s = 0.0;
    for (int n = 1; n <= N_max; ++n) s += a_hat(n + N_max) * std::cos(n * w);
    return a_hat(N_max) + 2.0 * s;
  }
};

inline AutocorrSpec autocorr(const FilterSpec& spec) {
  spec.validate();
  AutocorrSpec ac;
  ac.M = spec.M;
  ac.k = spec.k;
  ac.N_max = spec.n_max();
  ac.Z = filter_normalization(spec);
  const int N = ac.N_max;
  ac.a_hat.resize(2 * N + 1);
  for (int n = 0; n <= N; ++n) {
    double v;
    if (n <= spec.M)
      v = (1.0 - double(n) / spec.M) / (spec.M * ac.Z);
    else
      v = std::pow(double(n), -2.0 * spec.k) / ac.Z;
    ac.a_hat(N + n) = v;
    ac.a_hat(N - n) = v;
  }
  // Compensate the zero coefficient: with T accumulated in the same order as
  // eval's loop, eval(0) = (1 - 2T) + 2T is exact (Sterbenz: 2T lies in
  // [1/2, 2] for every admissible spec).
  double T = 0.0;
  for (int n = 1; n <= N; ++n) T += ac.a_hat(n + N);
  ac.a_hat(N) = 1.0 - 2.0 * T;
  return ac;
}

// Piecewise decay bound for the autocorrelation (without its fitted
// C/M^{2k} slack): quartic Taylor majorant of the Fejer main lobe near zero,
// global reciprocal bound elsewhere.
inline double adecay_bound(double w, int M) {
  const double x = std::abs(wrap_angle(w));
  if (x <= 2.0 / M) {
    const double mx = M * x;
    return 1.0 - mx * mx / 12.0 + mx * mx * mx * mx / 360.0;
  }
  return 2.0 / (M * M * (1.0 - std::cos(x)));
}

struct ADecayCheck {
  double C = 0.0;        // smallest slack constant making the bound hold
  double worst_w = 0.0;  // grid angle attaining it
};

// Measures the smallest C so that a(w) <= adecay_bound(w, M) + C/M^{2k}
// pointwise on the grid.
inline ADecayCheck adecay_measure(const AutocorrSpec& ac, int grid = 8192) {
  ADecayCheck out;
  const double scale = std::pow(double(ac.M), 2.0 * ac.k);
  for (int i = 0; i < grid; ++i) {
    const double w = -pi + two_pi * (i + 1) / grid;
    const double excess = (ac.eval(w) - adecay_bound(w, ac.M)) * scale;
    if (excess > out.C) {
      out.C = excess;
      out.worst_w = w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prolongation profile
// ---------------------------------------------------------------------------

struct ProlongationSpec {
  double delta = 0.25;  // inner cutoff: profile vanishes on [0, delta]

  double width() const { return 1.0 - delta; }
  void validate() const {
    if (!(delta > 0.0 && delta < 1.0))
      throw Error("invalid-prolongation", "delta must lie in (0,1)");
  }
  // Smooth compact bump centered at r = 1 with phi(1) = 1, support
  // (delta, 2 - delta).
  double phi(double r) const {
    const double u = (r - 1.0) / width();
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
  }
};

// ---------------------------------------------------------------------------
// Plane-wave approximation of the shifted autocorrelation
// ---------------------------------------------------------------------------

struct PlaneWaveCertificate {
  std::vector<Vec2> lags;      // cell anchors (difference-set points)
  std::vector<cplx> weights;   // p_q per lag
  double theta0 = 0.0;
  double sup_error = 0.0;      // max |a(angle(theta,theta0)) - eval(theta)|
  double p_norm = 0.0;         // l2 norm of the weights

  cplx eval(double theta) const {
    cplx acc{0.0, 0.0};
    for (size_t j = 0; j < lags.size(); ++j)
      acc += weights[j] * steering(lags[j], theta);
    return acc;
  }
};

namespace detail {

// |cell ∩ B_R| — exact for interior cells, Monte-Carlo for straddling ones.
inline double clipped_cell_area(const CoveringCell& c, double R,
                                std::uint64_t seed, long samples = 20000) {
  if (c.type == CellType::point) return 0.0;
  const double full = c.area();
  if (cell_max_norm(c) <= R + 1e-12) return full;
  Rng rng(seed);
  long hits = 0;
  for (long i = 0; i < samples; ++i)
    if (sample_cell(c, rng).norm() < R) ++hits;
  return full * double(hits) / double(samples);
}

}  // namespace detail

inline PlaneWaveCertificate plane_wave_approx(const Covering& cov, double R,
                                              double theta0,
                                              const AutocorrSpec& ac,
                                              const ProlongationSpec& prol,
                                              std::uint64_t area_seed = 4321) {
  prol.validate();
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  if (R > cov.R_cov + 1e-12)
    throw Error("quality-not-finite",
                "covering does not certify radius R; quality parameters are "
                "infinite");

  PlaneWaveCertificate cert;
  cert.theta0 = theta0;

  std::vector<double> areas(cov.cells.size(), 0.0);
  for (size_t i = 0; i < cov.cells.size(); ++i)
    areas[i] = detail::clipped_cell_area(cov.cells[i], R,
                                         mix_seed(area_seed, i));

  // F(x) = phi(|x|) a(angle(x) - theta0); its Fourier transform at each lag
  // by Gauss-Legendre (radial) x trapezoid (angular) quadrature, refined
  // until every lag value is stable to 1e-8.
  const double r_lo = prol.delta, r_hi = 2.0 - prol.delta;
  std::vector<cplx> fhat(cov.cells.size(), cplx(0.0, 0.0));
  bool converged = false;
  std::vector<cplx> prev;
  for (int level = 0; level < 4 && !converged; ++level) {
    const int n_rad = 32 << level;
    const int n_ang = 512 << level;
    const Quadrature gl = gauss_legendre(n_rad, r_lo, r_hi);
    std::vector<double> a_vals(n_ang);
    std::vector<double> cphi(n_ang), sphi(n_ang);
    for (int j = 0; j < n_ang; ++j) {
      const double phi_j = two_pi * j / n_ang;
      a_vals[j] = ac.eval(phi_j - theta0);
      cphi[j] = std::cos(phi_j);
      sphi[j] = std::sin(phi_j);
    }
    for (size_t q = 0; q < cov.cells.size(); ++q) {
      if (areas[q] <= 0.0) continue;
      const Vec2 lag = cov.cells[q].anchor;
      cplx acc{0.0, 0.0};
      for (int i = 0; i < n_rad; ++i) {
        const double r = gl.nodes[size_t(i)];
        const double wphi = prol.phi(r) * r * gl.weights[size_t(i)];
        if (wphi == 0.0) continue;
        cplx inner{0.0, 0.0};
        for (int j = 0; j < n_ang; ++j) {
          // -i <lag, x> at x = r (cos phi_j, sin phi_j)
          const double phase = -r * (lag.x() * cphi[j] + lag.y() * sphi[j]);
          inner += a_vals[j] * cplx(std::cos(phase), std::sin(phase));
        }
        acc += wphi * inner * (two_pi / n_ang);
      }
      fhat[q] = acc;
    }
    if (!prev.empty()) {
      converged = true;
      for (size_t q = 0; q < fhat.size(); ++q) {
        if (std::abs(fhat[q] - prev[q]) >
            1e-8 * std::max(1.0, std::abs(fhat[q]))) {
          converged = false;
          break;
        }
      }
    }
    prev = fhat;
  }
  if (!converged)
    throw Error("quadrature-not-converged",
                "lag Fourier quadrature did not stabilize to 1e-8");

  for (size_t q = 0; q < cov.cells.size(); ++q) {
    cert.lags.push_back(cov.cells[q].anchor);
    cert.weights.push_back(fhat[q] * areas[q] / (4.0 * pi * pi));
  }

  double nsq = 0.0;
  for (const cplx& wgt : cert.weights) nsq += std::norm(wgt);
  cert.p_norm = std::sqrt(nsq);

  for (int i = 0; i < 4096; ++i) {
    const double th = -pi + two_pi * (i + 1) / 4096;
    const double target = ac.eval(angular_distance(th, theta0));
    cert.sup_error =
        std::max(cert.sup_error, std::abs(cert.eval(th) - target));
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Soft-certificate condition checks
// ---------------------------------------------------------------------------

struct NoisyInputs {
  double e_bar = 0.0;  // measurement perturbation level
  double rho = 1.0;    // TV budget ratio (>= 1)
  double p_norm = 0.0; // certificate weight norm
};

struct CertificateReport {
  double t = 0.0;
  double sigma = 0.0;
  double bound = 0.0;        // t / sigma
  double cond1_value = 0.0;  // Re integral of g against mu0
  double cond3_sup = 0.0;    // sup |g - g(theta0) a(angle(.,theta0))|
  bool cond1_ok = false;
  bool cond3_ok = false;
  bool holds = false;
  bool noisy = false;
  double e_bar = 0.0, rho = 1.0, p_norm = 0.0;
  double noisy_bound = 0.0;
};

inline CertificateReport soft_cert_check(
    const std::function<cplx(double)>& g, const SpikeMeasure& mu0,
    double theta0, const AutocorrSpec& ac,
    const std::optional<NoisyInputs>& noisy = std::nullopt, int grid = 8192) {
  bool found = false;
  for (const auto& sp : mu0.spikes)
    if (angular_distance(sp.theta, theta0) < 1e-9) found = true;
  if (!found)
    throw Error("theta0-not-in-support",
                "theta0 must be a support point of mu0");

  CertificateReport rep;
  cplx integral{0.0, 0.0};
  for (const auto& sp : mu0.spikes) integral += g(sp.theta) * sp.amp;
  rep.cond1_value = integral.real();
  rep.cond1_ok = rep.cond1_value >= 1.0 - 1e-12;

  const cplx g0 = g(theta0);
  rep.sigma = std::abs(g0);

  double sup = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double w = -pi + two_pi * (i + 1) / grid;
    const double dev =
        std::abs(g(w) - g0 * ac.eval(angular_distance(w, theta0)));
    sup = std::max(sup, dev);
  }
  rep.cond3_sup = sup;
  rep.t = 1.0 - sup;
  rep.cond3_ok = rep.t > 0.0;
  rep.holds = rep.cond1_ok && rep.cond3_ok && rep.sigma > 0.0;
  rep.bound = rep.sigma > 0.0 ? rep.t / rep.sigma : 0.0;

  if (noisy) {
    rep.noisy = true;
    rep.e_bar = noisy->e_bar;
    rep.rho = noisy->rho;
    rep.p_norm = noisy->p_norm;
    if (rep.sigma > 0.0 && noisy->rho > 0.0)
      rep.noisy_bound =
          rep.bound - (2.0 * noisy->p_norm * noisy->e_bar + (noisy->rho - 1.0)) /
                          (noisy->rho * rep.sigma);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Main threshold / guarantee calculator
// ---------------------------------------------------------------------------

struct ThresholdReport {
  bool measurement_ok = false;  // 2*pi*(K*gamma(R) + C R^{-k}) < |c0|/6
  bool separation_ok = false;   // separation sup < |c0|/6
  bool pass = false;
  double measurement_lhs = 0.0;
  double threshold = 0.0;  // |c0|/6
  double guarantee = 0.0;  // 3|c0|/8 when the hypothesis passes
  bool noisy = false;
  double noisy_guarantee = 0.0;
};

inline ThresholdReport main_threshold(
    double c0_abs, double gammaR, double betaR, double R, int k, double K,
    double C, double separation_sup,
    const std::optional<std::pair<double, double>>& noisy =
        std::nullopt /* (e_bar, rho) */) {
  if (c0_abs < 0 || gammaR < 0 || betaR < 0 || R <= 0 || K < 0 || C < 0 ||
      separation_sup < 0)
    throw Error("negative-input", "all threshold inputs must be nonnegative");
  ThresholdReport rep;
  rep.threshold = c0_abs / 6.0;
  rep.measurement_lhs = two_pi * (K * gammaR + C * std::pow(R, -double(k)));
  rep.measurement_ok = rep.measurement_lhs < rep.threshold;  // strict
  rep.separation_ok = separation_sup < rep.threshold;        // strict
  rep.pass = rep.measurement_ok && rep.separation_ok;
  rep.guarantee = rep.pass ? 3.0 * c0_abs / 8.0 : 0.0;
  if (noisy) {
    rep.noisy = true;
    const double e_bar = noisy->first, rho = noisy->second;
    if (rep.pass && rho > 0.0)
      rep.noisy_guarantee =
          rep.guarantee -
          (6.0 * betaR * e_bar + 2.0 * (rho - 1.0) * c0_abs) / (3.0 * rho);
  }
  return rep;
}

}  // namespace tvdoa
