#pragma once
// End-to-end estimation: support localization from the dual polynomial,
// amplitude refit on the localized support (complex LASSO via FISTA),
// the grid-discretized baseline, and lambda selection.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tvdoa/geometry.hpp"
#include "tvdoa/measurement.hpp"
#include "tvdoa/sdp.hpp"
#include "tvdoa/trig.hpp"
#include "tvdoa/util.hpp"

namespace tvdoa {

struct LocalizationSettings {
  double grid_step = 0.001;   // radians
  double tau = 1e-4;          // retain samples with 1 - |q| below tau
  double cluster_gap = 0.05;  // radians; >= grid_step
  double prune_tol = 1e-3;    // relative amplitude prune threshold

  void validate() const {
    if (grid_step <= 0) throw Error("invalid-settings", "grid_step must be > 0");
    if (tau <= 0 || tau >= 1) throw Error("invalid-settings", "tau in (0,1)");
    if (cluster_gap < grid_step)
      throw Error("invalid-settings", "cluster_gap must be >= grid_step");
  }
};

// ---------------------------------------------------------------------------
// Support localization
// ---------------------------------------------------------------------------

// Thresholded grid search on 1 - |q| followed by |q|-weighted circular
// averaging of each cluster of retained samples.
inline std::vector<double> find_support(const TrigPoly& q,
                                        const LocalizationSettings& settings) {
  settings.validate();
  const int N = std::max<int>(8, int(std::lround(two_pi / settings.grid_step)));
  const double step = two_pi / N;

  std::vector<double> angles;   // retained sample angles, increasing
  std::vector<double> weights;  // |q| at the retained samples
  for (int i = 0; i < N; ++i) {
    const double w = -pi + (i + 1) * step;  // grid over (-pi, pi]
    const double a = std::abs(q.eval(w));
    if (1.0 - a < settings.tau) {
      angles.push_back(w);
      weights.push_back(a);
    }
  }
  if (angles.empty())
    throw Error("empty-support",
                "no grid sample reached the dual-polynomial threshold");
  if (int(angles.size()) > N / 2)
    throw Error("degenerate-support",
                "more than half of the circle passes the threshold");

  // Cluster boundaries: consecutive retained samples further apart than the
  // cluster gap (circularly).
  const int K = int(angles.size());
  std::vector<int> starts;  // index of the first sample of each cluster
  for (int i = 0; i < K; ++i) {
    const double prev = (i == 0) ? angles[K - 1] - two_pi : angles[i - 1];
    if (angles[i] - prev > settings.cluster_gap) starts.push_back(i);
  }

  std::vector<double> out;
  if (starts.empty()) {
    out.push_back(circular_mean(angles, weights));
  } else {
    const int C = int(starts.size());
    for (int c = 0; c < C; ++c) {
      const int begin = starts[c];
      const int end = starts[(c + 1) % C];  // exclusive, circular
      std::vector<double> ca, cw;
      int i = begin;
      do {
        ca.push_back(angles[i]);
        cw.push_back(weights[i]);
        i = (i + 1) % K;
      } while (i != end);
      out.push_back(circular_mean(ca, cw));
    }
  }
  for (double& a : out) a = wrap_angle(a);
  std::sort(out.begin(), out.end());

  // Merge means that ended up closer than the cluster gap (wide clusters).
  bool merged = true;
  while (merged && out.size() > 1) {
    merged = false;
    for (size_t i = 0; i < out.size() && !merged; ++i) {
      const size_t j = (i + 1) % out.size();
      if (angular_distance(out[i], out[j]) <= settings.cluster_gap) {
        const double mean =
            circular_mean({out[i], out[j]}, {1.0, 1.0});
        out.erase(out.begin() + std::max(i, j));
        out.erase(out.begin() + std::min(i, j));
        out.push_back(wrap_angle(mean));
        std::sort(out.begin(), out.end());
        merged = true;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Support operator and complex LASSO
// ---------------------------------------------------------------------------

struct SupportOperator {
  int m = 0;
  std::vector<double> angles;
  Eigen::MatrixXcd A;  // m^2 x K; column = vec(a(theta) a(theta)^*)

  Eigen::VectorXcd apply_adjoint(const CovMatrix& R) const {
    return A.adjoint() * Eigen::Map<const Eigen::VectorXcd>(R.data(), R.size());
  }
  CovMatrix apply(const Eigen::VectorXcd& c) const {
    const Eigen::VectorXcd v = A * c;
    return Eigen::Map<const CovMatrix>(v.data(), m, m);
  }
};

inline SupportOperator build_support_operator(const ArrayDesign& design,
                                              const std::vector<double>& angles) {
  for (size_t i = 0; i < angles.size(); ++i)
    for (size_t j = i + 1; j < angles.size(); ++j)
      if (angular_distance(angles[i], angles[j]) < 1e-12)
        throw Error("duplicate-angles", "support angles must be distinct");
  SupportOperator op;
  op.m = design.m;
  op.angles = angles;
  op.A.resize(design.m * design.m, int(angles.size()));
  for (size_t j = 0; j < angles.size(); ++j) {
    const Eigen::VectorXcd a = steering_vector(design, angles[j]);
    const CovMatrix atom = a * a.adjoint();
    op.A.col(int(j)) =
        Eigen::Map<const Eigen::VectorXcd>(atom.data(), atom.size());
  }
  return op;
}

namespace detail {

inline cplx soft_threshold(cplx z, double t) {
  const double a = std::abs(z);
  if (a <= t) return cplx(0.0, 0.0);
  return z * ((a - t) / a);
}

// Largest squared singular value by power iteration (deterministic start).
inline double operator_norm_sq(const Eigen::MatrixXcd& A, int iters = 80) {
  if (A.size() == 0) return 0.0;
  Rng rng(0x5eedc01dULL);
  Eigen::VectorXcd v(A.cols());
  for (int i = 0; i < v.size(); ++i) v(i) = rng.cnormal();
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXcd w = A.adjoint() * (A * v);
    const double n = w.norm();
    if (n < 1e-300) return 0.0;
    v = w / n;
    lam = n;
  }
  return lam;
}

}  // namespace detail

struct LassoOptions {
  int max_iters = 20000;
  double tol_change = 1e-10;  // sup-norm iterate change
  double tol_kkt = 1e-8;
  int check_every = 10;
  // Early exit once 0.5||Ac-b||^2 + lambda*||c||_1 drops to this value.
  double stop_at_objective = -std::numeric_limits<double>::infinity();
};

struct LassoResult {
  Eigen::VectorXcd c;
  int iterations = 0;
  double kkt_residual = 0.0;
  double objective = 0.0;
};

// FISTA with complex (magnitude) soft-thresholding and adaptive restart.
// KKT certificate at return: |adjoint(residual)| <= lambda on the inactive
// set and equal to lambda (pointing along c) on the active set, to tol_kkt.
inline LassoResult fista_lasso(const Eigen::MatrixXcd& A,
                               const Eigen::VectorXcd& b, double lambda,
                               const LassoOptions& opt = {}) {
  if (lambda < 0) throw Error("invalid-regularization", "lambda must be >= 0");
  LassoResult res;
  const int K = int(A.cols());
  res.c = Eigen::VectorXcd::Zero(K);
  if (K == 0) return res;

  if (lambda == 0.0) {  // plain least squares on the support
    res.c = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXcd r = b - A * res.c;
    res.kkt_residual = (A.adjoint() * r).cwiseAbs().maxCoeff();
    res.objective = 0.5 * r.squaredNorm();
    res.iterations = 1;
    return res;
  }

  const double lip = detail::operator_norm_sq(A) * 1.01;
  if (lip < 1e-300) return res;
  const double step = 1.0 / lip;

  Eigen::VectorXcd c = res.c, y = res.c, c_prev = res.c;
  double t = 1.0;
  double best_obj = 0.5 * b.squaredNorm();

  const auto kkt_of = [&](const Eigen::VectorXcd& ci,
                          const Eigen::VectorXcd& eta) {
    double worst = 0.0;
    for (int i = 0; i < K; ++i) {
      const double mag = std::abs(ci(i));
      if (mag > 0)
        worst = std::max(worst,
                         std::abs(eta(i) - lambda * ci(i) / mag));
      else
        worst = std::max(worst, std::max(0.0, std::abs(eta(i)) - lambda));
    }
    return worst;
  };

  for (int it = 1; it <= opt.max_iters; ++it) {
    const Eigen::VectorXcd grad = A.adjoint() * (A * y - b);
    c_prev = c;
    Eigen::VectorXcd z = y - step * grad;
    c.resize(K);
    for (int i = 0; i < K; ++i)
      c(i) = detail::soft_threshold(z(i), lambda * step);
    const double change = (c - c_prev).cwiseAbs().maxCoeff();
    res.iterations = it;

    bool stop = change < opt.tol_change;
    if (stop || it % std::max(1, opt.check_every) == 0) {
      const Eigen::VectorXcd r = b - A * c;
      const Eigen::VectorXcd eta = A.adjoint() * r;
      const double obj = 0.5 * r.squaredNorm() + lambda * c.cwiseAbs().sum();
      res.kkt_residual = kkt_of(c, eta);
      res.objective = obj;
      if (obj <= opt.stop_at_objective) break;
      if (res.kkt_residual < opt.tol_kkt) break;
      if (stop) break;
      if (obj > best_obj) {  // adaptive restart: kill the momentum
        t = 1.0;
        y = c;
        best_obj = obj;
        continue;
      }
      best_obj = std::min(best_obj, obj);
    }

    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = c + ((t - 1.0) / t_new) * (c - c_prev);
    t = t_new;
  }

  const Eigen::VectorXcd r = b - A * c;
  res.kkt_residual = kkt_of(c, A.adjoint() * r);
  res.objective = 0.5 * r.squaredNorm() + lambda * c.cwiseAbs().sum();
  res.c = c;
  return res;
}

inline Eigen::VectorXcd solve_support_lasso(const SupportOperator& op,
                                            const CovMatrix& b, double lambda,
                                            const LassoOptions& opt = {}) {
  const Eigen::VectorXcd bv =
      Eigen::Map<const Eigen::VectorXcd>(b.data(), b.size());
  return fista_lasso(op.A, bv, lambda, opt).c;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct EstimateDetail {
  SpikeMeasure measure;       // pruned, sorted by angle
  DualSolution dual;
  TrigPoly poly;              // dual polynomial
  std::vector<double> support;
  Eigen::VectorXcd amplitudes;  // pre-prune amplitudes on the support
  double lambda_used = 0.0;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + stage + ": " + e.what());
  }
}

}  // namespace detail

// Variant taking a prebuilt lag-response tensor (e.g. loaded from cache).
inline EstimateDetail estimate_detailed(const ArrayDesign& design,
                                        const CovMatrix& b,
                                        const GammaTensor& gamma,
                                        double lambda,
                                        const LocalizationSettings& loc = {},
                                        SolverSettings solver = {}) {
  loc.validate();
  EstimateDetail out;
  solver.lambda = lambda;
  out.dual = detail::run_stage(
      "solve_trig_sdp", [&] { return solve_trig_sdp(gamma, b, solver); });
  out.lambda_used = out.dual.lambda_used;
  out.poly = detail::run_stage(
      "dual_polynomial", [&] { return dual_polynomial(out.dual, gamma); });
  out.support = detail::run_stage(
      "find_support", [&] { return find_support(out.poly, loc); });
  const SupportOperator op = detail::run_stage("build_support_operator", [&] {
    return build_support_operator(design, out.support);
  });
  out.amplitudes = detail::run_stage("solve_support_lasso", [&] {
    return solve_support_lasso(op, b, out.lambda_used);
  });

  double amax = 0.0;
  for (int i = 0; i < out.amplitudes.size(); ++i)
    amax = std::max(amax, std::abs(out.amplitudes(i)));
  for (int i = 0; i < out.amplitudes.size(); ++i) {
    if (std::abs(out.amplitudes(i)) >= loc.prune_tol * amax && amax > 0)
      out.measure.spikes.push_back({out.support[size_t(i)], out.amplitudes(i)});
  }
  out.measure.sort_by_angle();
  return out;
}

inline EstimateDetail estimate_detailed(
    const ArrayDesign& design, const CovMatrix& b, int L, ApproxMode mode,
    double lambda, const LocalizationSettings& loc = {},
    SolverSettings solver = {}) {
  const GammaTensor gamma = detail::run_stage(
      "build_gamma", [&] { return build_gamma(design, L, mode); });
  return estimate_detailed(design, b, gamma, lambda, loc, solver);
}

inline SpikeMeasure estimate(const ArrayDesign& design, const CovMatrix& b,
                             int L, ApproxMode mode, double lambda,
                             const LocalizationSettings& loc = {},
                             const SolverSettings& solver = {}) {
  return estimate_detailed(design, b, L, mode, lambda, loc, solver).measure;
}

// ---------------------------------------------------------------------------
// Grid-discretized baseline
// ---------------------------------------------------------------------------

enum class DiscretizedMode { equality, regularized };

inline std::vector<double> uniform_angle_grid(int N) {
  std::vector<double> grid(N);
  for (int i = 0; i < N; ++i) grid[i] = -pi + two_pi * (i + 1) / N;
  return grid;
}

inline SpikeMeasure solve_discretized(const ArrayDesign& design,
                                      const CovMatrix& b, int N, double lambda,
                                      DiscretizedMode mode,
                                      const LassoOptions& opt_in = {}) {
  if (N < 2) throw Error("invalid-grid", "N >= 2 required");
  const double bnorm = b.norm();
  SpikeMeasure out;
  if (bnorm == 0.0) return out;
  // Equality constraints emulated by a floored regularizer: one solver path,
  // identical optima in the noiseless limit.
  const double lam =
      (mode == DiscretizedMode::equality) ? 1e-7 * bnorm : lambda;

  const SupportOperator op = build_support_operator(design, uniform_angle_grid(N));
  LassoOptions opt = opt_in;
  if (mode == DiscretizedMode::equality && opt_in.max_iters == LassoOptions{}.max_iters)
    opt.max_iters = 60000;
  const Eigen::VectorXcd c = solve_support_lasso(op, b, lam, opt);

  double amax = 0.0;
  for (int i = 0; i < c.size(); ++i) amax = std::max(amax, std::abs(c(i)));
  for (int i = 0; i < c.size(); ++i)
    if (std::abs(c(i)) > 1e-10 * amax)
      out.spikes.push_back({op.angles[size_t(i)], c(i)});
  out.sort_by_angle();
  return out;
}

// ---------------------------------------------------------------------------
// Lambda selection
// ---------------------------------------------------------------------------

namespace detail {

// Thin unitary basis for the range of the approximate forward operator
// (column space of G^T).
inline Eigen::MatrixXcd range_basis(const GammaTensor& gamma) {
  const Eigen::MatrixXcd GT = gamma.G.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(GT, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-12 * smax) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace detail

// Matrix-measurement mode: discrepancy principle. The noise scale is
// estimated from the component of b orthogonal to the operator range, which
// contains no signal; the largest ladder value whose refit residual stays
// within 1.05x of the implied noise norm wins.
inline double cross_validate_lambda(const ArrayDesign& design,
                                    const CovMatrix& b, int L,
                                    std::vector<double> ladder,
                                    const LocalizationSettings& loc = {},
                                    const SolverSettings& solver = {}) {
  if (ladder.empty()) throw Error("empty-ladder", "need at least one lambda");
  std::sort(ladder.begin(), ladder.end());
  const GammaTensor gamma = build_gamma(design, L);
  const Eigen::MatrixXcd U1 = detail::range_basis(gamma);
  const Eigen::VectorXcd z =
      Eigen::Map<const Eigen::VectorXcd>(b.data(), b.size());
  const Eigen::VectorXcd perp = z - U1 * (U1.adjoint() * z);
  const int dof = int(z.size()) - int(U1.cols());
  const double sigma_hat =
      dof > 0 ? std::sqrt(perp.squaredNorm() / dof) : 0.0;
  const double threshold =
      1.05 * std::max(sigma_hat * design.m, 1e-7 * b.norm());

  for (int i = int(ladder.size()) - 1; i >= 0; --i) {
    double resid;
    try {
      const SpikeMeasure mu =
          estimate(design, b, L, gamma.mode, ladder[size_t(i)], loc, solver);
      resid = (forward(design, mu) - b).norm();
    } catch (const Error&) {
      resid = b.norm();  // empty/degenerate estimate leaves b unexplained
    }
    if (resid <= threshold) return ladder[size_t(i)];
  }
  return ladder.front();
}

// Snapshot mode: K-fold cross validation over snapshot batches; the score of
// lambda is the held-out empirical-covariance residual of the refit estimate.
inline double cross_validate_lambda_snapshots(
    const ArrayDesign& design, const Eigen::MatrixXcd& snapshots, int L,
    std::vector<double> ladder, const LocalizationSettings& loc = {},
    const SolverSettings& solver = {}, int folds = 5) {
  if (ladder.empty()) throw Error("empty-ladder", "need at least one lambda");
  std::sort(ladder.begin(), ladder.end());
  const int T = int(snapshots.cols());
  folds = std::max(2, std::min(folds, T));

  const auto fold_cov = [&](int fold, bool train) {
    int count = 0;
    for (int t = 0; t < T; ++t)
      if ((t % folds == fold) != train) ++count;
    CovMatrix acc = CovMatrix::Zero(design.m, design.m);
    for (int t = 0; t < T; ++t)
      if ((t % folds == fold) != train)
        acc += snapshots.col(t) * snapshots.col(t).adjoint();
    if (count > 0) acc /= double(count);
    return acc;
  };

  std::vector<double> score(ladder.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const CovMatrix b_train = fold_cov(f, true);
    const CovMatrix b_test = fold_cov(f, false);
    for (size_t j = 0; j < ladder.size(); ++j) {
      CovMatrix fitted = CovMatrix::Zero(design.m, design.m);
      try {
        const SpikeMeasure mu =
            estimate(design, b_train, L, ApproxMode::truncated, ladder[j], loc,
                     solver);
        fitted = forward(design, mu);
      } catch (const Error&) {
        // empty estimate: fitted stays zero
      }
      score[j] += (fitted - b_test).squaredNorm();
    }
  }
  size_t best = 0;
  for (size_t j = 1; j < ladder.size(); ++j)
    if (score[j] <= score[best]) best = j;  // ties favor the larger lambda
  return ladder[best];
}

}  // namespace tvdoa
