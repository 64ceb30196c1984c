#pragma once
// Serialization: covariance matrices (CSV + binary), spike measures (CSV),
// designs (JSON), coverings (CSV cell dump), solver traces (CSV), and a
// keyed binary cache for Gamma tensors. Config helpers enforce a strict
// schema (unknown keys rejected).

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvdoa/geometry.hpp"
#include "tvdoa/measurement.hpp"
#include "tvdoa/sdp.hpp"
#include "tvdoa/trig.hpp"

namespace tvdoa {

using json = nlohmann::json;

namespace detail {

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  ensure_parent(path);
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw Error("io-open-failed", "cannot write " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw Error("io-open-failed", "cannot read " + path);
  return f;
}

inline std::vector<double> split_csv_line(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Covariance matrices
// ---------------------------------------------------------------------------

// Row-major CSV with interleaved "re,im" pairs: m lines of 2m numbers.
inline void write_cov_csv(const CovMatrix& b, const std::string& path) {
  auto f = detail::open_out(path);
  f << std::setprecision(17);
  for (int i = 0; i < b.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      if (j) f << ',';
      f << b(i, j).real() << ',' << b(i, j).imag();
    }
    f << '\n';
  }
}

inline CovMatrix read_cov_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw Error("io-parse-failed", path + ": empty matrix");
  const int m = int(rows.size());
  CovMatrix b(m, m);
  for (int i = 0; i < m; ++i) {
    if (int(rows[size_t(i)].size()) != 2 * m)
      throw Error("io-parse-failed",
                  path + ": expected " + std::to_string(2 * m) +
                      " values per row");
    for (int j = 0; j < m; ++j)
      b(i, j) = cplx(rows[size_t(i)][size_t(2 * j)],
                     rows[size_t(i)][size_t(2 * j + 1)]);
  }
  return b;
}

// Binary layout (little-endian): uint32 m, then m^2 complex doubles
// (re, im float64 pairs) in row-major order.
inline void write_cov_bin(const CovMatrix& b, const std::string& path) {
  auto f = detail::open_out(path, true);
  const std::uint32_t m = std::uint32_t(b.rows());
  f.write(reinterpret_cast<const char*>(&m), sizeof m);
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      const double re = b(i, j).real(), im = b(i, j).imag();
      f.write(reinterpret_cast<const char*>(&re), sizeof re);
      f.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
}

inline CovMatrix read_cov_bin(const std::string& path) {
  auto f = detail::open_in(path, true);
  std::uint32_t m = 0;
  f.read(reinterpret_cast<char*>(&m), sizeof m);
  if (!f || m == 0 || m > 100000)
    throw Error("io-parse-failed", path + ": bad matrix header");
  CovMatrix b(m, m);
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = 0; j < m; ++j) {
      double re = 0, im = 0;
      f.read(reinterpret_cast<char*>(&re), sizeof re);
      f.read(reinterpret_cast<char*>(&im), sizeof im);
      b(i, j) = cplx(re, im);
    }
  if (!f) throw Error("io-parse-failed", path + ": truncated matrix data");
  return b;
}

// ---------------------------------------------------------------------------
// Spike measures
// ---------------------------------------------------------------------------

inline void write_measure_csv(const SpikeMeasure& mu, const std::string& path) {
  auto f = detail::open_out(path);
  f << "theta_rad,re,im\n" << std::setprecision(17);
  for (const auto& sp : mu.spikes)
    f << sp.theta << ',' << sp.amp.real() << ',' << sp.amp.imag() << '\n';
}

inline SpikeMeasure read_measure_csv(const std::string& path) {
  auto f = detail::open_in(path);
  SpikeMeasure mu;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.find_first_not_of("+-.,0123456789eE \t\r") != std::string::npos)
      continue;  // header or comment
    const auto vals = detail::split_csv_line(line);
    if (vals.size() < 2)
      throw Error("io-parse-failed", path + ": need theta_rad,re[,im]");
    mu.spikes.push_back(
        {vals[0], cplx(vals[1], vals.size() > 2 ? vals[2] : 0.0)});
  }
  return mu;
}

// ---------------------------------------------------------------------------
// Designs (JSON)
// ---------------------------------------------------------------------------

inline json design_to_json(const ArrayDesign& d) {
  json j;
  j["kind"] = to_string(d.kind);
  j["m"] = d.m;
  j["extent"] = d.extent;
  j["P"] = d.P;
  j["index_set"] = d.index_set;
  json pos = json::array();
  for (const auto& p : d.positions) pos.push_back({p.x(), p.y()});
  j["positions"] = pos;
  return j;
}

inline ArrayDesign design_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw Error("config-invalid", "design JSON needs a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();
  const double extent = j.value("extent", 1.0);
  if (kind == "ula1d") return make_ula(j.value("m", 0), extent);
  if (kind == "lattice2d") return make_lattice(j.value("P", 0), extent);
  if (kind == "coprime2d") {
    std::vector<int> idx = j.value("index_set", std::vector<int>{});
    return make_coprime(idx, j.value("P", 0), extent);
  }
  if (kind == "circular") return make_circular(j.value("m", 0), extent);
  if (kind == "custom") {
    std::vector<Vec2> pos;
    for (const auto& p : j.value("positions", json::array()))
      pos.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return make_custom(pos);
  }
  throw Error("config-invalid", "unknown design kind '" + kind + "'");
}

inline void write_design_json(const ArrayDesign& d, const std::string& path) {
  auto f = detail::open_out(path);
  f << design_to_json(d).dump(2) << '\n';
}

inline ArrayDesign read_design_json(const std::string& path) {
  auto f = detail::open_in(path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error("config-invalid", path + ": " + e.what());
  }
  return design_from_json(j);
}

// ---------------------------------------------------------------------------
// Coverings and difference sets (CSV dumps for plotting)
// ---------------------------------------------------------------------------

inline void write_covering_csv(const Covering& cov, const std::string& path) {
  auto f = detail::open_out(path);
  f << "type,anchor_x,anchor_y,center_x,center_y,radius,r_in,r_out,"
       "angle_center_rad,angle_halfwidth_rad,halfwidth_x,halfwidth_y,"
       "y_lo,y_hi,clip_R\n"
    << std::setprecision(17);
  for (const auto& c : cov.cells) {
    const char* t = c.type == CellType::point            ? "point"
                    : c.type == CellType::disk           ? "disk"
                    : c.type == CellType::annular_sector ? "annular_sector"
                    : c.type == CellType::rectangle      ? "rectangle"
                                                         : "slab";
    f << t << ',' << c.anchor.x() << ',' << c.anchor.y() << ','
      << c.center.x() << ',' << c.center.y() << ',' << c.radius << ','
      << c.r_in << ',' << c.r_out << ',' << c.angle_center << ','
      << c.angle_halfwidth << ',' << c.halfwidth.x() << ','
      << c.halfwidth.y() << ',' << c.y_lo << ',' << c.y_hi << ','
      << c.clip_R << '\n';
  }
}

inline void write_diffs_csv(const DifferenceSet& ds, const std::string& path) {
  auto f = detail::open_out(path);
  f << "lag_x,lag_y,multiplicity\n" << std::setprecision(17);
  for (size_t i = 0; i < ds.points.size(); ++i)
    f << ds.points[i].x() << ',' << ds.points[i].y() << ','
      << ds.multiplicities[i] << '\n';
}

// ---------------------------------------------------------------------------
// Solver trace
// ---------------------------------------------------------------------------

inline void write_residual_csv(const std::vector<ResidualRecord>& hist,
                               const std::string& path) {
  auto f = detail::open_out(path);
  f << "iter,primal_residual,dual_residual,objective\n"
    << std::setprecision(17);
  for (const auto& r : hist)
    f << r.iter << ',' << r.primal << ',' << r.dual << ',' << r.objective
      << '\n';
}

// ---------------------------------------------------------------------------
// Gamma tensor cache
// ---------------------------------------------------------------------------

inline std::uint64_t design_hash(const ArrayDesign& d) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  const auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const int kind = int(d.kind);
  mix(&kind, sizeof kind);
  mix(&d.m, sizeof d.m);
  mix(&d.extent, sizeof d.extent);
  mix(&d.P, sizeof d.P);
  for (int v : d.index_set) mix(&v, sizeof v);
  for (const auto& p : d.positions) {
    const double x = p.x(), y = p.y();
    mix(&x, sizeof x);
    mix(&y, sizeof y);
  }
  return h;
}

inline void save_gamma_cache(const GammaTensor& g, const ArrayDesign& d,
                             const std::string& path) {
  auto f = detail::open_out(path, true);
  const char magic[4] = {'T', 'V', 'G', 'C'};
  const std::uint32_t version = 1;
  const std::uint64_t hash = design_hash(d);
  const std::int32_t L = g.L, m = g.m;
  const std::uint8_t mode = g.mode == ApproxMode::cesaro ? 1 : 0;
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&version), sizeof version);
  f.write(reinterpret_cast<const char*>(&hash), sizeof hash);
  f.write(reinterpret_cast<const char*>(&L), sizeof L);
  f.write(reinterpret_cast<const char*>(&m), sizeof m);
  f.write(reinterpret_cast<const char*>(&mode), sizeof mode);
  f.write(reinterpret_cast<const char*>(g.G.data()),
          std::streamsize(sizeof(cplx) * size_t(g.G.size())));
}

inline std::optional<GammaTensor> load_gamma_cache(const ArrayDesign& d, int L,
                                                   ApproxMode mode,
                                                   const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  char magic[4] = {};
  std::uint32_t version = 0;
  std::uint64_t hash = 0;
  std::int32_t fl = 0, fm = 0;
  std::uint8_t fmode = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  f.read(reinterpret_cast<char*>(&hash), sizeof hash);
  f.read(reinterpret_cast<char*>(&fl), sizeof fl);
  f.read(reinterpret_cast<char*>(&fm), sizeof fm);
  f.read(reinterpret_cast<char*>(&fmode), sizeof fmode);
  if (!f || std::memcmp(magic, "TVGC", 4) != 0 || version != 1) return std::nullopt;
  if (hash != design_hash(d) || fl != L || fm != d.m ||
      fmode != (mode == ApproxMode::cesaro ? 1 : 0))
    return std::nullopt;
  GammaTensor g;
  g.L = L;
  g.m = d.m;
  g.mode = mode;
  g.G.resize(2 * L + 1, d.m * d.m);
  f.read(reinterpret_cast<char*>(g.G.data()),
         std::streamsize(sizeof(cplx) * size_t(g.G.size())));
  if (!f) return std::nullopt;
  return g;
}

// ---------------------------------------------------------------------------
// Strict config helpers
// ---------------------------------------------------------------------------

inline void require_keys(const json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& context) {
  if (!j.is_object())
    throw Error("config-invalid", context + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw Error("config-unknown-key",
                  context + ": unknown key '" + item.key() + "'");
  }
}

inline SolverSettings parse_solver_settings(const json& j,
                                            SolverSettings base = {}) {
  require_keys(j,
               {"lambda", "L", "mode", "grid_step", "max_iters", "eps_abs",
                "eps_rel", "penalty", "adapt_period", "polish", "polish_grid"},
               "solver");
  base.max_iters = j.value("max_iters", base.max_iters);
  base.eps_abs = j.value("eps_abs", base.eps_abs);
  base.eps_rel = j.value("eps_rel", base.eps_rel);
  base.penalty = j.value("penalty", base.penalty);
  base.adapt_period = j.value("adapt_period", base.adapt_period);
  base.polish = j.value("polish", base.polish);
  base.polish_grid = j.value("polish_grid", base.polish_grid);
  if (base.max_iters < 1)
    throw Error("config-invalid", "solver.max_iters must be >= 1");
  if (base.eps_abs <= 0 || base.eps_rel <= 0)
    throw Error("config-invalid", "solver tolerances must be positive");
  return base;
}

}  // namespace tvdoa
