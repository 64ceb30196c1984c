// Command-line front end: design construction, measurement simulation,
// gridless estimation, batch experiments, and certificate checks.
// Exit codes: 0 success, 2 configuration/input error, 3 solver
// non-convergence.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "tvdoa/harness.hpp"

using namespace tvdoa;

namespace {

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

CovMatrix read_cov_any(const std::string& path) {
  return ends_with(path, ".bin") ? read_cov_bin(path) : read_cov_csv(path);
}

void write_cov_any(const CovMatrix& b, const std::string& path) {
  if (ends_with(path, ".bin"))
    write_cov_bin(b, path);
  else
    write_cov_csv(b, path);
}

LambdaRule lambda_rule_from_cli(const std::string& s) {
  try {
    const double v = std::stod(s);
    json j = v;
    return parse_lambda_rule(j);
  } catch (const Error&) {
    throw;
  } catch (...) {
    json j = s;
    return parse_lambda_rule(j);
  }
}

int run_design(const std::string& kind, int m, double radius, int P,
               const std::string& out, const std::string& emit_diffs,
               const std::string& emit_covering, double quality_R,
               std::uint64_t seed) {
  json dj;
  dj["kind"] = kind;
  dj["m"] = m;
  dj["extent"] = radius;
  dj["P"] = P;
  const ArrayDesign d = design_from_json(dj);
  if (!out.empty()) write_design_json(d, out);
  std::cout << "design kind=" << to_string(d.kind) << " m=" << d.m
            << " extent=" << d.extent << '\n';
  if (!emit_diffs.empty()) {
    write_diffs_csv(difference_set(d), emit_diffs);
    std::cout << "wrote " << emit_diffs << '\n';
  }
  const bool want_cov = !emit_covering.empty() || quality_R > 0;
  if (want_cov) {
    const Covering cov = build_covering(d, d.extent);
    if (!emit_covering.empty()) {
      write_covering_csv(cov, emit_covering);
      std::cout << "wrote " << emit_covering << " (R_cov=" << cov.R_cov
                << ")\n";
    }
    if (quality_R > 0) {
      const QualityParams qp = quality_params(cov, quality_R, seed);
      if (!qp.finite) {
        std::cout << "quality at R=" << quality_R
                  << ": infinite (" << qp.diagnostic << ")\n";
      } else {
        std::cout << "quality at R=" << quality_R << ": beta=" << qp.beta
                  << " (+/-" << qp.beta_halfwidth << ") gamma=" << qp.gamma
                  << " (+/-" << qp.gamma_halfwidth << ")\n";
      }
    }
  }
  return 0;
}

int run_simulate(const std::string& design_path, const std::string& mu_path,
                 const std::string& out, long snapshots, double sigma,
                 double snr, std::uint64_t seed) {
  const ArrayDesign d = read_design_json(design_path);
  const SpikeMeasure mu = read_measure_csv(mu_path);
  CovMatrix b;
  if (snapshots > 0) {
    SnapshotConfig cfg;
    cfg.T = snapshots;
    cfg.noise_sigma = sigma;
    cfg.seed = seed;
    b = simulate_snapshots(d, mu, cfg);
  } else {
    b = forward(d, mu);
    if (snr > 0) sigma = sigma_for_snr(b, snr);
    if (sigma > 0) b = add_matrix_noise(b, sigma, seed);
  }
  write_cov_any(b, out);
  std::cout << "wrote " << out << " (m=" << d.m << ")\n";
  return 0;
}

int run_estimate(const std::string& design_path, const std::string& b_path,
                 int L, const std::string& lambda_str, double grid_step,
                 const std::string& mode_str, const std::string& out,
                 const std::string& trace, const std::string& cache) {
  const ArrayDesign d = read_design_json(design_path);
  const CovMatrix b = read_cov_any(b_path);
  if (b.rows() != d.m)
    throw Error("config-invalid", "matrix size does not match design");

  SolverSpec spec;
  spec.L = L;
  spec.grid_step = grid_step;
  if (mode_str == "cesaro")
    spec.mode = ApproxMode::cesaro;
  else if (mode_str != "truncated")
    throw Error("config-invalid", "--mode must be truncated|cesaro");
  spec.lambda = lambda_rule_from_cli(lambda_str);
  if (spec.lambda.kind == LambdaRule::Kind::noise_scaled)
    throw Error("config-invalid",
                "noise:X lambda rules need a sigma; use a number, rel:X or "
                "auto here");
  if (!trace.empty()) spec.settings.history_stride = 1;

  GammaTensor gamma;
  bool have_gamma = false;
  if (!cache.empty()) {
    if (auto g = load_gamma_cache(d, L, spec.mode, cache)) {
      gamma = std::move(*g);
      have_gamma = true;
      std::cout << "gamma cache hit: " << cache << '\n';
    }
  }
  if (!have_gamma) {
    gamma = build_gamma(d, L, spec.mode);
    if (!cache.empty()) {
      save_gamma_cache(gamma, d, cache);
      std::cout << "gamma cache written: " << cache << '\n';
    }
  }

  const double lambda = detail::resolve_lambda(spec.lambda, d, b, spec);
  LocalizationSettings loc;
  loc.grid_step = grid_step;
  const EstimateDetail det =
      estimate_detailed(d, b, gamma, lambda, loc, spec.settings);

  if (!trace.empty()) write_residual_csv(det.dual.history, trace);
  if (!out.empty()) write_measure_csv(det.measure, out);
  std::cout << "lambda=" << det.lambda_used << " solver=" << det.dual.status
            << " iterations=" << det.dual.iterations << '\n';
  for (const auto& s : det.measure.spikes)
    std::cout << "spike theta_rad=" << s.theta << " amp=" << s.amp.real()
              << (s.amp.imag() >= 0 ? "+" : "") << s.amp.imag() << "i |amp|="
              << std::abs(s.amp) << '\n';
  if (det.dual.status != "converged") {
    std::cerr << "solver did not converge within the iteration budget\n";
    return 3;
  }
  return 0;
}

int run_experiment_cmd(const std::string& id, const std::string& config_path,
                       const std::string& outdir,
                       std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw Error("config-invalid", "cannot read " + config_path);
    json j;
    try {
      f >> j;
    } catch (const std::exception& e) {
      throw Error("config-invalid", config_path + ": " + e.what());
    }
    cfg = parse_experiment_config(j);
    if (!id.empty() && cfg.experiment != id)
      throw Error("config-invalid", "config is for experiment '" +
                                        cfg.experiment + "', not '" + id +
                                        "'");
  } else {
    cfg = default_experiment_config(id);
    if (id != "recovery" && id != "snr_sweep" && id != "resolution" &&
        id != "quality_asymptotics" && id != "certify_demo")
      throw Error("config-invalid", "unknown experiment '" + id + "'");
  }
  if (seed) cfg.seed = *seed;
  const json summary = run_experiment(cfg, outdir);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int run_certify(const std::string& design_path, const std::string& mu_path,
                double theta0, int M, int k, const std::string& R_str,
                double K, double C, double delta, const std::string& out,
                std::uint64_t seed) {
  const ArrayDesign d = read_design_json(design_path);
  SpikeMeasure mu = read_measure_csv(mu_path);
  if (mu.spikes.empty())
    throw Error("config-invalid", "ground-truth measure is empty");

  const Covering cov = build_covering(d, d.extent);
  double R;
  if (R_str == "auto") {
    R = natural_radius(d, cov);
  } else {
    try {
      R = std::stod(R_str);
    } catch (...) {
      throw Error("config-invalid", "--R must be a number or 'auto'");
    }
  }
  const QualityParams qp = quality_params(cov, R, seed);

  FilterSpec fs;
  fs.M = M;
  fs.k = k;
  const AutocorrSpec ac = autocorr(fs);

  const Spike* s0 = nullptr;
  for (const auto& s : mu.spikes)
    if (angular_distance(s.theta, theta0) < 1e-9) s0 = &s;
  if (!s0)
    throw Error("theta0-not-in-support",
                "theta0 must coincide with a ground-truth spike");
  double sep_sup = 0.0;
  for (const auto& s : mu.spikes)
    if (&s != s0)
      sep_sup += std::abs(s.amp) * ac.eval(angular_distance(s.theta, theta0));

  json rep;
  rep["design"] = design_to_json(d);
  rep["R"] = R;
  rep["filter"] = {{"M", M}, {"k", k}, {"Z", ac.Z}};
  if (!qp.finite) {
    rep["quality"] = {{"finite", false}, {"diagnostic", qp.diagnostic}};
    rep["guarantee_status"] = "no guarantee";
  } else {
    rep["quality"] = {{"finite", true},
                      {"beta", qp.beta},
                      {"gamma", qp.gamma}};
    const ThresholdReport thr = main_threshold(
        std::abs(s0->amp), qp.gamma, qp.beta, R, k, K, C, sep_sup);
    rep["threshold"] = {{"measurement_ok", thr.measurement_ok},
                        {"separation_ok", thr.separation_ok},
                        {"pass", thr.pass},
                        {"measurement_lhs", thr.measurement_lhs},
                        {"threshold", thr.threshold},
                        {"separation_sup", sep_sup},
                        {"guarantee", thr.guarantee}};
    rep["guarantee_status"] = thr.pass ? "certified" : "no guarantee";

    ProlongationSpec prol;
    prol.delta = delta;
    const PlaneWaveCertificate pw =
        plane_wave_approx(cov, R, wrap_angle(theta0), ac, prol,
                          mix_seed(seed, 4321));
    cplx pair_raw = 0.0;
    for (const auto& s : mu.spikes) pair_raw += pw.eval(s.theta) * s.amp;
    rep["plane_wave"] = {{"sup_error", pw.sup_error},
                         {"p_norm", pw.p_norm},
                         {"lags", pw.lags.size()}};
    if (pair_raw.real() > 0) {
      const double scale = 1.0 / pair_raw.real();
      const auto g = [scale, &pw](double w) { return scale * pw.eval(w); };
      const CertificateReport cert =
          soft_cert_check(g, mu, wrap_angle(theta0), ac);
      rep["certificate"] = {{"t", cert.t},
                            {"sigma", cert.sigma},
                            {"bound", cert.bound},
                            {"cond1_value", cert.cond1_value},
                            {"cond3_sup", cert.cond3_sup},
                            {"holds", cert.holds}};
    }
  }

  if (!out.empty()) {
    auto f = detail::open_out(out);
    f << rep.dump(2) << '\n';
  }
  std::cout << rep.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Gridless direction-of-arrival estimation from covariance "
      "measurements on arbitrary planar arrays"};
  app.require_subcommand(1);

  // design ------------------------------------------------------------------
  auto* cd = app.add_subcommand("design", "Construct an array design");
  std::string d_kind = "circular", d_out, d_diffs, d_covering;
  int d_m = 17, d_P = 0;
  double d_radius = 1.0, d_quality_R = 0.0;
  std::uint64_t d_seed = 1234;
  cd->add_option("--kind", d_kind, "ula1d|lattice2d|circular");
  cd->add_option("--m", d_m, "antenna count");
  cd->add_option("--radius", d_radius, "aperture / circle radius");
  cd->add_option("--P", d_P, "lattice side count");
  cd->add_option("--out", d_out, "write design JSON here");
  cd->add_option("--emit-diffs", d_diffs, "write difference-set CSV");
  cd->add_option("--emit-covering", d_covering, "write covering cell CSV");
  cd->add_option("--quality-R", d_quality_R,
                 "evaluate quality parameters at this radius");
  cd->add_option("--seed", d_seed, "sampling seed for quality estimates");

  // simulate ----------------------------------------------------------------
  auto* cs = app.add_subcommand("simulate", "Simulate covariance measurements");
  std::string s_design, s_mu, s_out = "b.csv";
  long s_T = 0;
  double s_sigma = 0.0, s_snr = 0.0;
  std::uint64_t s_seed = 42;
  cs->add_option("--design", s_design, "design JSON")->required();
  cs->add_option("--mu", s_mu, "ground-truth spike CSV")->required();
  cs->add_option("--out", s_out, "output matrix (.csv or .bin)");
  cs->add_option("--snapshots", s_T,
                 "empirical covariance from T snapshots (0 = exact forward)");
  cs->add_option("--sigma", s_sigma, "noise level");
  cs->add_option("--snr", s_snr, "matrix-noise SNR in dB (exact mode)");
  cs->add_option("--seed", s_seed, "noise seed");

  // estimate ----------------------------------------------------------------
  auto* ce = app.add_subcommand("estimate", "Gridless spike recovery");
  std::string e_design, e_b, e_lambda = "auto", e_mode = "truncated", e_out,
              e_trace, e_cache;
  int e_L = 20;
  double e_grid = 0.001;
  ce->add_option("--design", e_design, "design JSON")->required();
  ce->add_option("--b", e_b, "covariance matrix (.csv or .bin)")->required();
  ce->add_option("--L", e_L, "trigonometric degree");
  ce->add_option("--lambda", e_lambda, "number | auto | rel:X");
  ce->add_option("--grid-step", e_grid, "support localization grid step");
  ce->add_option("--mode", e_mode, "truncated|cesaro");
  ce->add_option("--out", e_out, "write estimated spikes CSV");
  ce->add_option("--trace", e_trace, "write solver residual trace CSV");
  ce->add_option("--gamma-cache", e_cache, "binary lag-response cache file");

  // experiment ----------------------------------------------------------
  auto* cx = app.add_subcommand("experiment", "Run a batch experiment");
  std::string x_id, x_config, x_out = "out";
  std::uint64_t x_seed = 0;
  bool x_seed_set = false;
  cx->add_option("id", x_id,
                 "recovery|snr_sweep|resolution|quality_asymptotics|"
                 "certify_demo");
  cx->add_option("--config", x_config, "experiment config JSON");
  cx->add_option("--out", x_out, "output directory");
  cx->add_option("--seed", x_seed, "override config seed")
      ->each([&](const std::string&) { x_seed_set = true; });

  // certify -------------------------------------------------------------
  auto* cc = app.add_subcommand("certify",
                                "Check the recovery guarantee for a "
                                "ground-truth measure");
  std::string c_design, c_mu, c_R = "auto", c_out;
  double c_theta0 = 0.0, c_K = 1e-3, c_C = 0.05, c_delta = 0.25;
  int c_M = 16, c_k = 3;
  std::uint64_t c_seed = 1234;
  cc->add_option("--design", c_design, "design JSON")->required();
  cc->add_option("--mu", c_mu, "ground-truth spike CSV")->required();
  cc->add_option("--theta0", c_theta0, "certified angle (radians)")
      ->required();
  cc->add_option("--M", c_M, "filter order");
  cc->add_option("--k", c_k, "tail smoothness exponent");
  cc->add_option("--R", c_R, "quality radius (number or 'auto')");
  cc->add_option("--K", c_K, "measurement-term constant");
  cc->add_option("--C", c_C, "tail-term constant");
  cc->add_option("--delta", c_delta, "prolongation inner cutoff");
  cc->add_option("--out", c_out, "write JSON report here");
  cc->add_option("--seed", c_seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cd)
      return run_design(d_kind, d_m, d_radius, d_P, d_out, d_diffs,
                        d_covering, d_quality_R, d_seed);
    if (*cs) return run_simulate(s_design, s_mu, s_out, s_T, s_sigma, s_snr,
                                 s_seed);
    if (*ce)
      return run_estimate(e_design, e_b, e_L, e_lambda, e_grid, e_mode, e_out,
                          e_trace, e_cache);
    if (*cx)
      return run_experiment_cmd(
          x_id, x_config, x_out,
          x_seed_set ? std::optional<std::uint64_t>(x_seed) : std::nullopt);
    if (*cc)
      return run_certify(c_design, c_mu, c_theta0, c_M, c_k, c_R, c_K, c_C,
                         c_delta, c_out, c_seed);
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    const std::string code = e.code();
    if (code == "max-iters" || code.find("not-converged") != std::string::npos)
      return 3;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
