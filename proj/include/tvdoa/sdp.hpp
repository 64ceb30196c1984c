#pragma once
// ADMM solver for the regularized dual of the TV-minimization problem,
// reformulated as a semidefinite program via the bounded-real certificate for
// trigonometric polynomials: maximize Re<p,b> - (lambda/2)||p||_F^2 over
// Hermitian p whose dual polynomial (Gamma p) has sup-modulus at most 1.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tvdoa/measurement.hpp"
#include "tvdoa/trig.hpp"
#include "tvdoa/util.hpp"

namespace tvdoa {

struct SolverSettings {
  double lambda = 1e-3;     // regularization; floored at 1e-6 * ||b||_F
  int max_iters = 20000;
  double eps_abs = 1e-7;    // absolute residual tolerance
  double eps_rel = 1e-6;    // relative residual tolerance
  double penalty = 1.0;     // initial ADMM penalty
  bool adapt_penalty = true;
  int adapt_period = 50;    // residual balancing cadence
  double penalty_min = 1e-4;
  double penalty_max = 1e4;
  double relaxation = 1.6;  // over-relaxation factor, 1.0 = vanilla splitting
  bool polish = true;       // post-hoc exact-feasibility polish
  int polish_grid = 32768;
  int history_stride = 1;   // record residuals every k-th iteration
};

struct ResidualRecord {
  int iter = 0;
  double primal = 0.0;
  double dual = 0.0;
  double objective = 0.0;  // lambda-scaled (primal-comparable) value
};

struct DualSolution {
  CovMatrix p;            // Hermitian m x m dual variable
  Eigen::MatrixXcd Q;     // (2L+1) x (2L+1) Gram block, PSD with unit trace sums
  double objective = 0.0;          // lambda * (Re<p,b> - (lambda/2)||p||^2)
  double raw_dual_objective = 0.0; // Re<p,b> - (lambda/2)||p||^2
  double lambda_used = 0.0;
  int iterations = 0;
  std::vector<ResidualRecord> history;
  std::string status;  // "converged" | "max-iters"
};

namespace detail {

// Orthonormal basis of Hermitian m x m matrices under the real Frobenius
// inner product: E_kk; (E_kl + E_lk)/sqrt(2); i(E_kl - E_lk)/sqrt(2).
inline Eigen::VectorXd herm_coords(const Eigen::MatrixXcd& P) {
  const int m = int(P.rows());
  const double s = std::sqrt(2.0);
  Eigen::VectorXd w(m * m);
  int r = 0;
  for (int k = 0; k < m; ++k) w(r++) = P(k, k).real();
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < l; ++k) {
      w(r++) = s * P(k, l).real();
      w(r++) = s * P(k, l).imag();
    }
  return w;
}

inline Eigen::MatrixXcd herm_from_coords(const Eigen::VectorXd& w, int m) {
  const double is = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(m, m);
  int r = 0;
  for (int k = 0; k < m; ++k) P(k, k) = w(r++);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < l; ++k) {
      const double a = w(r++), bval = w(r++);
      P(k, l) = cplx(a, bval) * is;
      P(l, k) = std::conj(P(k, l));
    }
  return P;
}

// Columns: dual-polynomial coefficients of each Hermitian basis element, so
// that coeffs(Gamma p(w)) = C w for real coordinate vectors w.
inline Eigen::MatrixXcd gamma_coupling(const GammaTensor& gamma) {
  const int m = gamma.m;
  const int n = 2 * gamma.L + 1;
  const double is = 1.0 / std::sqrt(2.0);
  const cplx I(0.0, 1.0);
  Eigen::MatrixXcd C(n, m * m);
  int r = 0;
  for (int k = 0; k < m; ++k) C.col(r++) = gamma.G.col(k + k * m);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < l; ++k) {
      const auto ckl = gamma.G.col(k + l * m);
      const auto clk = gamma.G.col(l + k * m);
      C.col(r++) = (ckl + clk) * is;
      C.col(r++) = (-I * ckl + I * clk) * is;
    }
  return C;
}

// Orthogonal projection (within the Hermitian subspace) onto the affine set
// of prescribed superdiagonal sums: sum_i Q(i, i+j) = targets(j).
inline void project_superdiag_sums(Eigen::MatrixXcd& Q,
                                   const Eigen::VectorXcd& targets) {
  const int n = int(Q.rows());
  Q = (0.5 * (Q + Q.adjoint())).eval();
  for (int j = 0; j < n; ++j) {
    cplx s{0.0, 0.0};
    for (int i = 0; i + j < n; ++i) s += Q(i, i + j);
    cplx shift = (s - targets(j)) / double(n - j);
    if (j == 0) {
      const double sh = shift.real();
      for (int i = 0; i < n; ++i) Q(i, i) = cplx(Q(i, i).real() - sh, 0.0);
    } else {
      for (int i = 0; i + j < n; ++i) {
        Q(i, i + j) -= shift;
        Q(i + j, i) = std::conj(Q(i, i + j));
      }
    }
  }
}

inline Eigen::MatrixXcd psd_project(const Eigen::MatrixXcd& S,
                                    double* min_eig = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      (0.5 * (S + S.adjoint())).eval());
  if (min_eig) *min_eig = es.eigenvalues().minCoeff();
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

inline double grid_sup_abs(const TrigPoly& q, int grid) {
  double s = 0.0;
  for (int i = 0; i < grid; ++i)
    s = std::max(s, std::abs(q.eval(two_pi * i / grid)));
  return s;
}

inline TrigPoly dual_polynomial(const DualSolution& sol,
                                const GammaTensor& gamma) {
  return apply_gamma(gamma, sol.p);
}

namespace detail {

// Superdiagonal sums r_j = delta_{j0} - sum_i c_i conj(c_{i+j}): the Fourier
// coefficients of 1 - |q|^2 for the causal coefficient vector c.
inline Eigen::VectorXcd residual_coeffs(const Eigen::VectorXcd& c) {
  const int n = int(c.size());
  Eigen::VectorXcd targets(n);
  for (int j = 0; j < n; ++j) {
    cplx r{0.0, 0.0};
    for (int i = 0; i + j < n; ++i) r += c(i) * std::conj(c(i + j));
    targets(j) = (j == 0) ? cplx(1.0 - r.real(), 0.0) : -r;
  }
  return targets;
}

// Spectral (Fejer-Riesz) factorization: given one-sided coefficients
// rpos(j) = r_j of a trig polynomial r(w) = sum_j r_j e^{ijw} > 0, find a
// causal h with |h(w)|^2 = r(w). Roots of z^M r(z) come in (z, 1/conj(z))
// pairs; h collects the strictly-inside ones.
inline std::optional<Eigen::VectorXcd> spectral_factor(
    const Eigen::VectorXcd& rpos) {
  const int n = int(rpos.size());
  const double rmax = rpos.cwiseAbs().maxCoeff();
  if (!(rmax > 0) || rpos(0).real() <= 0) return std::nullopt;
  // Trim near-zero leading coefficients aggressively: a tiny leading term
  // unbalances the companion matrix and destroys eigenvalue accuracy. The
  // trimmed tail is recovered afterwards by Gauss-Newton refinement of the
  // factor against the full coefficient vector.
  int M = n - 1;
  while (M > 0 && std::abs(rpos(M)) < 1e-8 * rmax) --M;
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n);
  if (M == 0) {
    h(0) = std::sqrt(rpos(0).real());
    return h;
  }
  const int d = 2 * M;
  const cplx lead = rpos(M);
  Eigen::VectorXcd coef(d + 1);  // of z^M r(z) divided by the leading term
  for (int j = -M; j <= M; ++j)
    coef(j + M) = (j >= 0 ? rpos(j) : std::conj(rpos(-j))) / lead;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < d; ++i) comp(i, d - 1) = -coef(i);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  if (es.info() != Eigen::Success) return std::nullopt;
  std::vector<cplx> roots(es.eigenvalues().data(),
                          es.eigenvalues().data() + d);
  std::sort(roots.begin(), roots.end(),
            [](const cplx& a, const cplx& b) {
              return std::abs(a) < std::abs(b);
            });
  // exactly half the roots lie inside the circle; take the smallest M so
  // that near-circle pairs split consistently even under roundoff
  Eigen::VectorXcd poly = Eigen::VectorXcd::Zero(M + 1);
  poly(0) = 1.0;
  double inside_modulus_product = 1.0;
  for (int i = 0; i < M; ++i) {
    const cplx z = roots[size_t(i)];
    inside_modulus_product *= std::abs(z);
    for (int t = M; t >= 1; --t) poly(t) = poly(t - 1) - z * poly(t);
    poly(0) *= -z;
  }
  const double kappa_sq = std::abs(lead) / std::max(inside_modulus_product,
                                                    1e-300);
  if (!std::isfinite(kappa_sq)) return std::nullopt;
  const double kappa = std::sqrt(kappa_sq);
  // sum_i h_i conj(h_{i+j}) must equal rpos(j): that sum is the -j Fourier
  // coefficient of |h|^2, so the factor built for the +j orientation gets
  // conjugated coefficient-wise.
  for (int t = 0; t <= M; ++t) h(t) = kappa * std::conj(poly(t));
  return h;
}

// Levenberg-Marquardt refinement of a causal factor h against superdiagonal
// targets r_j = sum_i h_i conj(h_{i+j}). Recovers the digits the companion
// root finder loses when 1 - |q|^2 nearly touches zero on the circle (the
// Jacobian is close to rank-deficient there, so plain Gauss-Newton stalls)
// and absorbs coefficients dropped by the leading-term trim. Returns the
// worst residual reached.
inline double refine_factor(Eigen::VectorXcd& h,
                            const Eigen::VectorXcd& targets) {
  const int n = int(targets.size());
  auto eval_residual = [&](const Eigen::VectorXcd& hh, Eigen::VectorXd& out) {
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
      cplx s{0.0, 0.0};
      for (int i = 0; i + j < n; ++i) s += hh(i) * std::conj(hh(i + j));
      const cplx r = s - targets(j);
      out(2 * j) = r.real();
      out(2 * j + 1) = r.imag();
      worst = std::max(worst, std::abs(r));
    }
    return worst;
  };
  Eigen::VectorXd res(2 * n);
  double best = eval_residual(h, res);
  double damping = 1e-10;
  for (int it = 0; it < 60 && best > 1e-14; ++it) {
    // rows: (Re r_j, Im r_j); columns: (Re h_k, Im h_k). The phase gauge
    // h -> e^{i phi} h leaves r fixed, so the normal equations are singular
    // without the damping term.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const cplx up = (k + j < n) ? std::conj(h(k + j)) : cplx(0.0, 0.0);
        const cplx dn = (k - j >= 0) ? h(k - j) : cplx(0.0, 0.0);
        const cplx dx = up + dn;
        const cplx dy = cplx(0.0, 1.0) * (up - dn);
        J(2 * j, 2 * k) = dx.real();
        J(2 * j + 1, 2 * k) = dx.imag();
        J(2 * j, 2 * k + 1) = dy.real();
        J(2 * j + 1, 2 * k + 1) = dy.imag();
      }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * res;
    const double diag_scale = JtJ.diagonal().maxCoeff() + 1e-300;
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += damping * diag_scale;
      const Eigen::VectorXd step = A.ldlt().solve(-Jtr);
      Eigen::VectorXcd trial = h;
      for (int k = 0; k < n; ++k)
        trial(k) += cplx(step(2 * k), step(2 * k + 1));
      Eigen::VectorXd trial_res(2 * n);
      const double t = eval_residual(trial, trial_res);
      if (t < best) {
        best = t;
        h = trial;
        res = trial_res;
        damping = std::max(damping / 3.0, 1e-12);
        improved = true;
      } else {
        damping = std::min(damping * 10.0, 1e8);
      }
    }
    if (!improved) break;
  }
  return best;
}

// Alternating-projection completion (PSD cone vs affine trace set), used to
// refine or replace the spectral factor; optionally warm-started.
inline std::optional<Eigen::MatrixXcd> gram_completion(
    const Eigen::VectorXcd& c, int max_iters = 50000, double tol = 1e-10,
    const Eigen::MatrixXcd* warm = nullptr) {
  const int n = int(c.size());
  const Eigen::VectorXcd targets = residual_coeffs(c);
  Eigen::MatrixXcd G =
      warm ? *warm : Eigen::MatrixXcd::Zero(n, n).eval();
  for (int it = 0; it < max_iters; ++it) {
    project_superdiag_sums(G, targets);
    G = psd_project(G);
    double res = 0.0;  // trace residual of the (exactly PSD) iterate
    for (int j = 0; j < n; ++j) {
      cplx s{0.0, 0.0};
      for (int i = 0; i + j < n; ++i) s += G(i, i + j);
      res = std::max(res, std::abs(s - targets(j)));
    }
    if (res < tol) return G;
  }
  return std::nullopt;
}

// Try the direct spectral factorization first; fall back to (or refine with)
// alternating projections. Returns G with cc* + G satisfying the unit trace
// sums, PSD up to eigensolver precision.
inline std::optional<Eigen::MatrixXcd> complete_gram(const Eigen::VectorXcd& c,
                                                     double tol = 1e-10) {
  const Eigen::VectorXcd targets = residual_coeffs(c);
  if (auto h = spectral_factor(targets)) {
    const double res = refine_factor(*h, targets);
    Eigen::MatrixXcd G = (*h) * h->adjoint();
    if (res < tol) return G;
    if (auto refined = gram_completion(c, 2000, tol, &G)) return refined;
  }
  return gram_completion(c);
}

}  // namespace detail

// Rescales p (downward only) until the dual polynomial is strictly feasible
// on a dense grid, then rebuilds Q so the trace constraints hold exactly and
// the certificate block is PSD up to eigensolver precision.
inline void polish_feasibility(const GammaTensor& gamma, DualSolution& sol,
                               int grid = 32768) {
  for (double margin : {1e-7, 3e-6, 1e-4}) {
    TrigPoly q = apply_gamma(gamma, sol.p);
    const double sup = grid_sup_abs(q, grid);
    if (sup > 1.0 - margin) {
      const double scale = (1.0 - margin) / sup;
      sol.p *= scale;
      q.coeffs *= scale;
    }
    auto G = detail::complete_gram(q.coeffs);
    if (G) {
      sol.Q = q.coeffs * q.coeffs.adjoint() + *G;
      return;
    }
  }
  // Unreachable in practice: the widest margin leaves ample interior.
  throw Error("polish-failed", "gram completion did not converge");
}

inline DualSolution solve_trig_sdp(const GammaTensor& gamma, const CovMatrix& b,
                                   const SolverSettings& settings) {
  const int m = gamma.m;
  const int n = 2 * gamma.L + 1;
  const int dim = n + 1;
  if (b.rows() != m || b.cols() != m)
    throw Error("dimension-mismatch", "b must be m x m for the gamma tensor");

  const double bnorm = b.norm();
  const double lam = std::max({settings.lambda, 1e-6 * bnorm, 1e-12});

  const Eigen::MatrixXcd C = detail::gamma_coupling(gamma);
  const Eigen::MatrixXd AtA = (C.adjoint() * C).real();
  const Eigen::VectorXd g =
      detail::herm_coords((0.5 * (b + b.adjoint())).eval());

  double beta = std::clamp(settings.penalty, settings.penalty_min,
                           settings.penalty_max);
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  const auto refactor = [&] {
    Eigen::MatrixXd N = 2.0 * beta * AtA;
    N.diagonal().array() += lam;
    ldlt.compute(N);
  };
  refactor();

  Eigen::VectorXcd trace_targets = Eigen::VectorXcd::Zero(n);
  trace_targets(0) = 1.0;

  Eigen::MatrixXcd Q = Eigen::MatrixXcd::Identity(n, n) / double(n);
  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(dim, dim);
  X.topLeftCorner(n, n) = Q;
  X(n, n) = 1.0;
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m * m);

  DualSolution sol;
  sol.lambda_used = lam;
  sol.status = "max-iters";

  for (int it = 1; it <= settings.max_iters; ++it) {
    const Eigen::MatrixXcd V = (0.5 * ((X - U) + (X - U).adjoint())).eval();

    Q = V.topLeftCorner(n, n);
    detail::project_superdiag_sums(Q, trace_targets);

    const Eigen::VectorXcd v = V.block(0, n, n, 1);
    w = ldlt.solve(g + 2.0 * beta * (C.adjoint() * v).real());
    const Eigen::VectorXcd c = C * w;

    M.topLeftCorner(n, n) = Q;
    M.block(0, n, n, 1) = c;
    M.block(n, 0, 1, n) = c.adjoint();
    M(n, n) = 1.0;

    // Over-relaxed splitting step: blend the constraint-block iterate with
    // the previous PSD iterate before projecting.
    const double alpha = settings.relaxation;
    const Eigen::MatrixXcd Mr = alpha * M + (1.0 - alpha) * X;
    const Eigen::MatrixXcd Xnew = detail::psd_project(Mr + U);
    const double r_pri = (M - Xnew).norm();
    const double r_dual = beta * (Xnew - X).norm();
    U += Mr - Xnew;
    X = Xnew;

    const double raw = g.dot(w) - 0.5 * lam * w.squaredNorm();
    if (it % std::max(1, settings.history_stride) == 0)
      sol.history.push_back({it, r_pri, r_dual, lam * raw});
    sol.iterations = it;

    const double eps_pri =
        dim * settings.eps_abs +
        settings.eps_rel * std::max(M.norm(), X.norm());
    const double eps_dual =
        dim * settings.eps_abs + settings.eps_rel * beta * U.norm();
    if (r_pri < eps_pri && r_dual < eps_dual) {
      sol.status = "converged";
      break;
    }

    if (settings.adapt_penalty && it % std::max(1, settings.adapt_period) == 0) {
      if (r_pri > 10.0 * r_dual && beta * 2.0 <= settings.penalty_max) {
        beta *= 2.0;
        U /= 2.0;
        refactor();
      } else if (r_dual > 10.0 * r_pri && beta / 2.0 >= settings.penalty_min) {
        beta /= 2.0;
        U *= 2.0;
        refactor();
      }
    }
  }

  sol.p = detail::herm_from_coords(w, m);
  sol.Q = Q;
  if (settings.polish) polish_feasibility(gamma, sol, settings.polish_grid);

  const double re_pb = (sol.p.conjugate().cwiseProduct(b)).sum().real();
  sol.raw_dual_objective = re_pb - 0.5 * lam * sol.p.squaredNorm();
  sol.objective = lam * sol.raw_dual_objective;
  return sol;
}

// ---------------------------------------------------------------------------
// KKT / feasibility diagnostics
// ---------------------------------------------------------------------------

struct KktReport {
  double psd_min_eig = 0.0;     // of [[Q, Gamma p],[(Gamma p)*, 1]]
  double trace_residual = 0.0;  // max_j |sum_i Q(i,i+j) - delta_{j0}|
  double sup_excess = 0.0;      // max(0, grid sup |dual polynomial| - 1)
  double stationarity = 0.0;    // distance of b - lambda*p from the range of
                                // the approximate forward operator
  double primal_residual = -1.0;  // ||forward(mu) - b + lambda*p||_F if mu given
};

inline KktReport kkt_report(const DualSolution& sol, const GammaTensor& gamma,
                            const CovMatrix& b, double lambda,
                            const SpikeMeasure* mu_hat = nullptr) {
  KktReport rep;
  const int n = 2 * gamma.L + 1;
  const TrigPoly q = apply_gamma(gamma, sol.p);

  Eigen::MatrixXcd Xb(n + 1, n + 1);
  Xb.topLeftCorner(n, n) = sol.Q;
  Xb.block(0, n, n, 1) = q.coeffs;
  Xb.block(n, 0, 1, n) = q.coeffs.adjoint();
  Xb(n, n) = 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      (0.5 * (Xb + Xb.adjoint())).eval());
  rep.psd_min_eig = es.eigenvalues().minCoeff();

  for (int j = 0; j < n; ++j) {
    cplx s{0.0, 0.0};
    for (int i = 0; i + j < n; ++i) s += sol.Q(i, i + j);
    const cplx target = (j == 0) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
    rep.trace_residual = std::max(rep.trace_residual, std::abs(s - target));
  }

  rep.sup_excess = std::max(0.0, grid_sup_abs(q, 8192) - 1.0);

  // Stationarity: at the optimum b - lambda*p equals the forward image of the
  // primal measure, so its component orthogonal to the operator range
  // vanishes. The range is the column space of G^T.
  const Eigen::MatrixXcd GT = gamma.G.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(GT, Eigen::ComputeThinU);
  const CovMatrix grad = b - lambda * sol.p;
  const Eigen::VectorXcd z =
      Eigen::Map<const Eigen::VectorXcd>(grad.data(), grad.size());
  const double smax = svd.singularValues().size()
                          ? svd.singularValues()(0)
                          : 0.0;
  Eigen::VectorXcd proj = Eigen::VectorXcd::Zero(z.size());
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) <= 1e-12 * smax) break;
    const Eigen::VectorXcd ui = svd.matrixU().col(i);
    proj += ui * ui.dot(z);
  }
  rep.stationarity = (z - proj).norm();

  if (mu_hat) {
    const CovMatrix fwd = gamma_forward(gamma, *mu_hat);
    rep.primal_residual = (fwd - b + lambda * sol.p).norm();
  }
  return rep;
}

}  // namespace tvdoa
