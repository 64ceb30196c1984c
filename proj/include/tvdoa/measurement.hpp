#pragma once
// Steering responses, the covariance-domain measurement operator, snapshot
// simulation, and the two noise models (snapshot-level and matrix-level).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "tvdoa/geometry.hpp"
#include "tvdoa/util.hpp"

namespace tvdoa {

using CovMatrix = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// Spike measures
// ---------------------------------------------------------------------------

struct Spike {
  double theta = 0.0;  // angle in (-pi, pi]
  cplx amp{0.0, 0.0};
};

struct SpikeMeasure {
  std::vector<Spike> spikes;

  double tv() const {
    double s = 0;
    for (const auto& sp : spikes) s += std::abs(sp.amp);
    return s;
  }

  // Scale amplitudes so the TV norm is 1.
  void normalize_tv() {
    const double t = tv();
    if (t <= 0) throw Error("empty-measure", "cannot normalize zero measure");
    for (auto& sp : spikes) sp.amp /= t;
  }

  void sort_by_angle() {
    std::sort(spikes.begin(), spikes.end(),
              [](const Spike& a, const Spike& b) { return a.theta < b.theta; });
  }

  void validate() const {
    for (std::size_t i = 0; i < spikes.size(); ++i) {
      for (std::size_t j = i + 1; j < spikes.size(); ++j) {
        if (angular_distance(spikes[i].theta, spikes[j].theta) < 1e-9)
          throw Error("duplicate-angles", "spike angles must be distinct");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Steering and the forward operator
// ---------------------------------------------------------------------------

// Planar-wave response of a displacement delta to direction theta:
// exp(i (cos theta * delta_x + sin theta * delta_y)). Unit modulus.
inline cplx steering(const Vec2& delta, double theta) {
  const double phase =
      std::cos(theta) * delta.x() + std::sin(theta) * delta.y();
  return std::polar(1.0, phase);
}

// Steering vector a(theta) with a_k = steering(position_k, theta).
inline Eigen::VectorXcd steering_vector(const ArrayDesign& design,
                                        double theta) {
  Eigen::VectorXcd a(design.m);
  for (int k = 0; k < design.m; ++k) a(k) = steering(design.positions[k], theta);
  return a;
}

// Covariance-domain measurement: b_{kl} = sum_j c_j steering(D_k - D_l, th_j),
// i.e. the integral of the lag responses against the measure.
inline CovMatrix forward(const ArrayDesign& design, const SpikeMeasure& mu) {
  CovMatrix b = CovMatrix::Zero(design.m, design.m);
  for (const auto& sp : mu.spikes) {
    const Eigen::VectorXcd a = steering_vector(design, sp.theta);
    b += sp.amp * (a * a.adjoint());
  }
  return b;
}

// ---------------------------------------------------------------------------
// Snapshot simulation
// ---------------------------------------------------------------------------

struct SnapshotConfig {
  long T = 1;                // snapshot count
  double noise_sigma = 0.0;  // per-antenna noise standard deviation
  std::uint64_t seed = 0;
};

// Raw snapshots r(t) = sum_l w_l(t) a(theta_l) + n(t); returned as columns.
inline Eigen::MatrixXcd draw_snapshots(const ArrayDesign& design,
                                       const SpikeMeasure& mu,
                                       const SnapshotConfig& cfg) {
  if (cfg.T < 1) throw Error("invalid-snapshot-count", "T >= 1 required");
  for (const auto& sp : mu.spikes)
    if (sp.amp.real() < 0 || std::abs(sp.amp.imag()) > 1e-12)
      throw Error("negative-amplitude",
                  "snapshot simulation needs nonnegative real powers");
  Rng rng(cfg.seed);
  const int m = design.m;
  std::vector<Eigen::VectorXcd> atoms;
  for (const auto& sp : mu.spikes)
    atoms.push_back(steering_vector(design, sp.theta));
  Eigen::MatrixXcd r(m, cfg.T);
  for (long t = 0; t < cfg.T; ++t) {
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(m);
    for (std::size_t l = 0; l < atoms.size(); ++l) {
      const cplx w = std::sqrt(mu.spikes[l].amp.real()) * rng.cnormal();
      x += w * atoms[l];
    }
    for (int k = 0; k < m; ++k) x(k) += cfg.noise_sigma * rng.cnormal();
    r.col(t) = x;
  }
  return r;
}

// Empirical covariance (1/T) sum r(t) r(t)^*. As T grows this converges to
// forward(mu) + noise_sigma^2 I.
inline CovMatrix simulate_snapshots(const ArrayDesign& design,
                                    const SpikeMeasure& mu,
                                    const SnapshotConfig& cfg) {
  const Eigen::MatrixXcd r = draw_snapshots(design, mu, cfg);
  CovMatrix b = (r * r.adjoint()) / double(cfg.T);
  b = (b + b.adjoint().eval()) / 2.0;  // enforce exact Hermitian symmetry
  return b;
}

// ---------------------------------------------------------------------------
// Matrix-level noise and the SNR convention
// ---------------------------------------------------------------------------

// b + H with H = (G + G^*)/sqrt(2), G iid complex Gaussian entries of
// variance sigma^2; then E||H||_F^2 = sigma^2 m^2. Deterministic per seed.
inline CovMatrix add_matrix_noise(const CovMatrix& b, double sigma,
                                  std::uint64_t seed) {
  if (sigma < 0) throw Error("invalid-sigma", "sigma >= 0 required");
  if (sigma == 0) return b;
  const int m = static_cast<int>(b.rows());
  Rng rng(seed);
  Eigen::MatrixXcd g(m, m);
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) g(k, l) = sigma * rng.cnormal();
  const Eigen::MatrixXcd h = (g + g.adjoint().eval()) / std::sqrt(2.0);
  return b + h;
}

// SNR in dB: 10 log10(||b_clean||_F^2 / noise_power), noise_power = E||H||_F^2.
inline double snr_db(const CovMatrix& b_clean, double noise_power) {
  if (noise_power <= 0) throw Error("zero-noise", "noise power must be > 0");
  return 10.0 * std::log10(b_clean.squaredNorm() / noise_power);
}

// Noise sigma achieving a target SNR for a given clean measurement:
// sigma^2 m^2 = ||b||_F^2 10^{-snr/10}.
inline double sigma_for_snr(const CovMatrix& b_clean, double snr_db_target) {
  const int m = static_cast<int>(b_clean.rows());
  const double noise_power =
      b_clean.squaredNorm() * std::pow(10.0, -snr_db_target / 10.0);
  return std::sqrt(noise_power) / m;
}

}  // namespace tvdoa
