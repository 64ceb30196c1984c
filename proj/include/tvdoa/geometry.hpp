#pragma once
// Antenna array designs, difference sets (co-arrays), coverings of centered
// disks with the centroid property, and the quality parameters beta(R),
// gamma(R) that score a covering.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tvdoa/util.hpp"

namespace tvdoa {

using Vec2 = Eigen::Vector2d;

// Error with a stable machine-readable code plus human context.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + (detail.empty() ? "" : ": " + detail)),
        code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

enum class DesignKind { ula1d, lattice2d, coprime2d, circular, custom };

inline std::string to_string(DesignKind k) {
  switch (k) {
    case DesignKind::ula1d: return "ula1d";
    case DesignKind::lattice2d: return "lattice2d";
    case DesignKind::coprime2d: return "coprime2d";
    case DesignKind::circular: return "circular";
    default: return "custom";
  }
}

struct ArrayDesign {
  DesignKind kind = DesignKind::custom;
  std::vector<Vec2> positions;  // wavelength-normalized antenna coordinates
  int m = 0;                    // antenna count
  double extent = 0.0;          // R (aperture) or D/rho (circle radius)
  int P = 0;                    // side count for (sub)lattice designs
  std::vector<int> index_set;   // coprime sub-lattice indices
};

// 1-D uniform linear array: positions (0, k R / m), k = 0..m-1.
inline ArrayDesign make_ula(int m, double R) {
  if (m < 2) throw Error("too-few-antennas", "ula1d needs m >= 2");
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  ArrayDesign d;
  d.kind = DesignKind::ula1d;
  d.m = m;
  d.extent = R;
  for (int k = 0; k < m; ++k) d.positions.push_back({0.0, k * R / m});
  return d;
}

// 2-D uniform lattice: positions (R/P)(k, j), k, j = 0..P-1; m = P^2.
inline ArrayDesign make_lattice(int P, double R) {
  if (P < 2) throw Error("too-few-antennas", "lattice2d needs P >= 2");
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  ArrayDesign d;
  d.kind = DesignKind::lattice2d;
  d.m = P * P;
  d.extent = R;
  d.P = P;
  for (int k = 0; k < P; ++k)
    for (int j = 0; j < P; ++j)
      d.positions.push_back({k * R / P, j * R / P});
  return d;
}

// Co-prime style sub-lattice: index set D x D scaled by R/P. Requires
// D - D to cover every lag in {-(P-1), ..., P-1}.
inline ArrayDesign make_coprime(const std::vector<int>& index_set, int P,
                                double R) {
  if (P < 2) throw Error("too-few-antennas", "coprime2d needs P >= 2");
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  for (int lag = -(P - 1); lag <= P - 1; ++lag) {
    bool found = false;
    for (int a : index_set) {
      for (int b : index_set) {
        if (a - b == lag) {
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found)
      throw Error("invalid-index-set",
                  "difference set misses lag " + std::to_string(lag));
  }
  ArrayDesign d;
  d.kind = DesignKind::coprime2d;
  d.extent = R;
  d.P = P;
  d.index_set = index_set;
  for (int a : index_set)
    for (int b : index_set) d.positions.push_back({a * R / P, b * R / P});
  d.m = static_cast<int>(d.positions.size());
  if (d.m < 2) throw Error("too-few-antennas", "index set too small");
  return d;
}

// Circular array: positions D e^{2 pi i k / m} as points in the plane.
inline ArrayDesign make_circular(int m, double D) {
  if (m < 5) throw Error("too-few-antennas", "circular needs m >= 5");
  if (D <= 0) throw Error("invalid-extent", "D must be positive");
  ArrayDesign d;
  d.kind = DesignKind::circular;
  d.m = m;
  d.extent = D;
  for (int k = 0; k < m; ++k) {
    const double a = two_pi * k / m;
    d.positions.push_back({D * std::cos(a), D * std::sin(a)});
  }
  return d;
}

inline ArrayDesign make_custom(std::vector<Vec2> positions) {
  if (positions.size() < 2) throw Error("too-few-antennas", "need >= 2");
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      if ((positions[i] - positions[j]).norm() < 1e-12)
        throw Error("duplicate-positions", "positions must be distinct");
  ArrayDesign d;
  d.kind = DesignKind::custom;
  d.m = static_cast<int>(positions.size());
  d.positions = std::move(positions);
  double r = 0;
  for (const auto& p : d.positions) r = std::max(r, p.norm());
  d.extent = r;
  return d;
}

// ---------------------------------------------------------------------------
// Difference sets
// ---------------------------------------------------------------------------

struct DifferenceSet {
  std::vector<Vec2> points;        // deduplicated lags
  std::vector<int> multiplicities; // ordered-pair counts per lag
};

// All pairwise position differences, deduplicated at 1e-9.
inline DifferenceSet difference_set(const ArrayDesign& design) {
  constexpr double tol = 1e-9;
  DifferenceSet ds;
  for (const auto& pk : design.positions) {
    for (const auto& pl : design.positions) {
      const Vec2 q = pk - pl;
      bool merged = false;
      for (std::size_t i = 0; i < ds.points.size(); ++i) {
        if ((ds.points[i] - q).norm() < tol) {
          ++ds.multiplicities[i];
          merged = true;
          break;
        }
      }
      if (!merged) {
        ds.points.push_back(q);
        ds.multiplicities.push_back(1);
      }
    }
  }
  return ds;
}

// Closed-form circular difference set (even m): the points
// 2 rho sin(j pi / m) e^{i j pi / m} e^{2 pi i kappa / m},
// kappa = 1..m, j = 0..m/2, deduplicated.
inline DifferenceSet circular_difference_closed_form(int m, double rho) {
  if (m % 2 != 0)
    throw Error("odd-m-unsupported",
                "closed form requires even m; use difference_set");
  if (m < 4) throw Error("too-few-antennas", "need m >= 4");
  constexpr double tol = 1e-9;
  DifferenceSet ds;
  for (int j = 0; j <= m / 2; ++j) {
    const double r = 2.0 * rho * std::sin(j * pi / m);
    for (int kappa = 1; kappa <= m; ++kappa) {
      // Differences of circle points are tangent-directed: e^{i a} - e^{i b}
      // = 2 sin((a-b)/2) e^{i (pi/2 + (a+b)/2)}, hence the pi/2 offset.
      const double ang = pi / 2.0 + j * pi / m + two_pi * kappa / m;
      const Vec2 q{r * std::cos(ang), r * std::sin(ang)};
      bool merged = false;
      for (std::size_t i = 0; i < ds.points.size(); ++i) {
        if ((ds.points[i] - q).norm() < tol) {
          ++ds.multiplicities[i];
          merged = true;
          break;
        }
      }
      if (!merged) {
        ds.points.push_back(q);
        ds.multiplicities.push_back(1);
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Annular-sector centroid (closed form)
// ---------------------------------------------------------------------------

// Centroid of {(r, phi) : r_in <= r <= r_out, |phi - alpha| <= halfwidth}:
// radius 2 (r1^2 + r1 r2 + r2^2) / (3 (r1 + r2)) * sinc(halfwidth), angle
// alpha.
inline Vec2 annular_sector_centroid(double r_in, double r_out, double alpha,
                                    double halfwidth) {
  if (r_in == r_out) throw Error("degenerate-sector", "r_in == r_out");
  if (!(0.0 <= r_in && r_in < r_out))
    throw Error("invalid-sector", "need 0 <= r_in < r_out");
  if (!(halfwidth > 0.0 && halfwidth <= pi))
    throw Error("invalid-sector", "need 0 < halfwidth <= pi");
  const double radius = 2.0 * (r_in * r_in + r_in * r_out + r_out * r_out) /
                        (3.0 * (r_in + r_out)) * sinc(halfwidth);
  return {radius * std::cos(alpha), radius * std::sin(alpha)};
}

// ---------------------------------------------------------------------------
// Circular covering radii
// ---------------------------------------------------------------------------

struct CircularRadii {
  // boundaries[j] = s_{j+1}; boundaries[0] = s_1 = 0. Ring j (1-based,
  // j = 1..J) occupies radii [boundaries[j-1], boundaries[j]).
  std::vector<double> boundaries;
  std::vector<double> ring_radius;  // rho_j = 2 rho sin(j pi / m), j = 1..J
  int J = 0;                        // number of valid rings
  double theta_hat = 0.0;           // (largest valid rho_j) / rho
};

// Sequential radii: s_1 = 0 and s_{j+1} is the positive root of
//   2 (s_j^2 + s_j s + s^2) sinc(pi/m) = 3 rho_j (s_j + s),
// i.e. the boundary making ring j's sector centroid radius equal rho_j.
// Stops at the first ring where the interleaving s_j <= rho_j <= s_{j+1}
// fails or s_j >= c_j.
inline CircularRadii circular_radii(int m, double rho) {
  if (m < 5) throw Error("m-too-small", "circular radii need m >= 5");
  if (rho <= 0) throw Error("invalid-extent", "rho must be positive");
  CircularRadii out;
  out.boundaries.push_back(0.0);
  const double snc = sinc(pi / m);
  const int max_ring = m / 2;
  for (int j = 1; j <= max_ring; ++j) {
    const double rho_j = 2.0 * rho * std::sin(j * pi / m);
    const double s_j = out.boundaries.back();
    const double c_j = 3.0 * rho_j / (2.0 * snc);
    if (s_j >= c_j) break;
    const double s_next =
        0.5 * (c_j - s_j) * (1.0 + std::sqrt(1.0 + 4.0 * s_j / (c_j - s_j)));
    if (!(s_j <= rho_j && rho_j <= s_next)) break;
    out.boundaries.push_back(s_next);
    out.ring_radius.push_back(rho_j);
    out.J = j;
  }
  if (out.J == 0) throw Error("m-too-small", "no valid ring produced");
  out.theta_hat = out.ring_radius.back() / rho;
  return out;
}

// ---------------------------------------------------------------------------
// Covering cells
// ---------------------------------------------------------------------------

enum class CellType { point, disk, annular_sector, rectangle, slab };

struct CoveringCell {
  CellType type = CellType::point;
  Vec2 anchor = Vec2::Zero();  // difference-set point hosted by the cell

  // disk: center = anchor region, radius
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  // annular sector
  double r_in = 0.0, r_out = 0.0, angle_center = 0.0, angle_halfwidth = 0.0;
  // axis rectangle: center + halfwidths
  Vec2 halfwidth = Vec2::Zero();
  // slab: y in [y_lo, y_hi), clipped to the disk of radius clip_R
  double y_lo = 0.0, y_hi = 0.0, clip_R = 0.0;

  bool contains(const Vec2& x) const {
    switch (type) {
      case CellType::point:
        return false;  // measure zero
      case CellType::disk:
        return (x - center).norm() < radius;
      case CellType::annular_sector: {
        const double r = x.norm();
        if (r < r_in || r >= r_out) return false;
        const double dphi = wrap_angle(std::atan2(x.y(), x.x()) - angle_center);
        return dphi >= -angle_halfwidth && dphi < angle_halfwidth;
      }
      case CellType::rectangle:
        return std::abs(x.x() - center.x()) < halfwidth.x() &&
               std::abs(x.y() - center.y()) < halfwidth.y();
      case CellType::slab:
        return x.y() >= y_lo && x.y() < y_hi && x.norm() < clip_R;
    }
    return false;
  }

  // Lebesgue measure of the (unclipped-by-B_R) cell.
  double area() const {
    switch (type) {
      case CellType::point:
        return 0.0;
      case CellType::disk:
        return pi * radius * radius;
      case CellType::annular_sector:
        return angle_halfwidth * (r_out * r_out - r_in * r_in);
      case CellType::rectangle:
        return 4.0 * halfwidth.x() * halfwidth.y();
      case CellType::slab:
        return slab_area(y_lo, y_hi, clip_R);
    }
    return 0.0;
  }

  // Area of {y in [lo, hi]} intersected with the centered disk of radius R.
  static double slab_area(double lo, double hi, double R) {
    auto prim = [R](double y) {
      y = std::clamp(y, -R, R);
      return y * std::sqrt(std::max(0.0, R * R - y * y)) +
             R * R * std::asin(std::clamp(y / R, -1.0, 1.0));
    };
    return prim(hi) - prim(lo);
  }

  // First moment (integral of y) of the clipped slab, for centroids.
  static double slab_moment_y(double lo, double hi, double R) {
    auto prim = [R](double y) {
      y = std::clamp(y, -R, R);
      return -2.0 / 3.0 * std::pow(std::max(0.0, R * R - y * y), 1.5);
    };
    return prim(hi) - prim(lo);
  }
};

struct Covering {
  std::vector<CoveringCell> cells;
  DesignKind kind = DesignKind::custom;
  double R_cov = 0.0;  // largest radius the construction claims to cover
};

namespace detail {

// Upper slab boundary v > u such that the y-centroid of
// {y in [u, v]} ∩ B_R equals target; nullopt when unreachable with v <= R.
inline std::optional<double> solve_slab_boundary(double u, double target,
                                                 double R) {
  if (u >= R || u >= target) return std::nullopt;
  auto centroid = [&](double v) {
    // For v within rounding of u the primitive differences below are pure
    // cancellation noise; use the thin-sliver limit (centroid -> u) instead.
    if (v - u < 1e-12 * std::max(1.0, std::abs(u))) return u;
    const double a = CoveringCell::slab_area(u, v, R);
    if (a <= 0) return u;
    return CoveringCell::slab_moment_y(u, v, R) / a;
  };
  if (centroid(R) < target) return std::nullopt;
  const double v = bisect([&](double x) { return centroid(x) - target; },
                          std::nextafter(u, R), R, 1e-15);
  return v;
}

}  // namespace detail

// Build the covering construction native to the design family.
//  - lattice2d / coprime2d: axis squares of side R_design/P at every lag;
//    they tile a square containing B_{R_cov}, R_cov = R_design (2P-1)/(2P).
//  - circular: point cell at the origin, rings of half-open annular sectors
//    (angular width 2 pi / m) from circular_radii, point cells for the
//    remaining lags; R_cov = s_{J+1}.
//  - ula1d: horizontal slabs clipped to B_R (the requested R), boundaries
//    solved so each slab's y-centroid is its lag; outer lags degrade to
//    point cells; R_cov = the last achieved boundary.
inline Covering build_covering(const ArrayDesign& design, double R) {
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  Covering cov;
  cov.kind = design.kind;
  const DifferenceSet ds = difference_set(design);

  if (design.kind == DesignKind::lattice2d ||
      design.kind == DesignKind::coprime2d) {
    const double h = design.extent / design.P / 2.0;  // half side
    for (const auto& q : ds.points) {
      CoveringCell c;
      c.type = CellType::rectangle;
      c.anchor = q;
      c.center = q;
      c.halfwidth = {h, h};
      cov.cells.push_back(c);
    }
    cov.R_cov = design.extent * (2.0 * design.P - 1.0) / (2.0 * design.P);
    return cov;
  }

  if (design.kind == DesignKind::circular) {
    const double rho = design.extent;
    const CircularRadii rad = circular_radii(design.m, rho);
    constexpr double rtol = 1e-9;
    for (const auto& q : ds.points) {
      CoveringCell c;
      c.anchor = q;
      const double r = q.norm();
      int ring = 0;  // 0 = no sector ring hosts this lag
      for (int j = 1; j <= rad.J; ++j)
        if (std::abs(r - rad.ring_radius[j - 1]) < rtol) ring = j;
      if (ring == 0) {
        c.type = CellType::point;  // origin and beyond-Theta lags
      } else {
        // A sector is assigned only to the lag whose angle sits on the
        // parity-matching grid pi/2 + pi (ring + 2k) / m (differences of two
        // circle points are tangent-directed, hence the pi/2 offset); the
        // opposite family on the same ring keeps point cells.
        const double ang = std::atan2(q.y(), q.x());
        const double steps = (ang - pi / 2.0) / (pi / design.m) - ring;
        const double k = steps / 2.0;
        const bool on_grid = std::abs(k - std::round(k)) < 1e-6;
        if (!on_grid) {
          c.type = CellType::point;
        } else {
          c.type = CellType::annular_sector;
          c.r_in = rad.boundaries[ring - 1];
          c.r_out = rad.boundaries[ring];
          c.angle_center = ang;
          c.angle_halfwidth = pi / design.m;
        }
      }
      cov.cells.push_back(c);
    }
    cov.R_cov = rad.boundaries.back();
    return cov;
  }

  if (design.kind == DesignKind::ula1d) {
    const double d = design.extent / design.m;  // lag spacing
    // Positive lags j d, j = 0..m-1; solve boundaries upward from d/2.
    std::vector<double> bounds;  // bounds[j] = upper boundary of slab j
    bounds.push_back(d / 2.0);   // zero-lag slab is (-d/2, d/2)
    int achieved = 0;            // largest j with a slab
    for (int j = 1; j < design.m; ++j) {
      auto v = detail::solve_slab_boundary(bounds.back(), j * d, R);
      if (!v) {
        if (j == 1)
          throw Error("infeasible-covering",
                      "slab solving failed at lag 1 (index 1)");
        break;
      }
      bounds.push_back(*v);
      achieved = j;
    }
    for (const auto& q : ds.points) {
      CoveringCell c;
      c.anchor = q;
      const int j = static_cast<int>(std::llround(q.y() / d));
      const int aj = std::abs(j);
      if (aj <= achieved) {
        c.type = CellType::slab;
        c.clip_R = R;
        const double lo = (aj == 0) ? -bounds[0] : bounds[aj - 1];
        const double hi = bounds[aj];
        if (j >= 0) {
          c.y_lo = lo;
          c.y_hi = hi;
        } else {  // mirror image
          c.y_lo = -hi;
          c.y_hi = -lo;
        }
      } else {
        c.type = CellType::point;
      }
      cov.cells.push_back(c);
    }
    cov.R_cov = bounds.back();
    return cov;
  }

  throw Error("unsupported-design", "no covering construction for custom");
}

// ---------------------------------------------------------------------------
// Quality parameters
// ---------------------------------------------------------------------------

struct QualityParams {
  double R = 0.0;
  double beta = std::numeric_limits<double>::infinity();
  double gamma = std::numeric_limits<double>::infinity();
  bool finite = false;
  std::string diagnostic;
  long samples_used = 0;      // Monte-Carlo samples over straddling cells
  double beta_halfwidth = 0;  // 95% confidence half-widths of the estimators
  double gamma_halfwidth = 0;
};

namespace detail {

// Uniform sample inside a cell (its own geometry, ignoring B_R).
inline Vec2 sample_cell(const CoveringCell& c, Rng& rng) {
  switch (c.type) {
    case CellType::rectangle:
      return {c.center.x() + c.halfwidth.x() * (2 * rng.uniform() - 1),
              c.center.y() + c.halfwidth.y() * (2 * rng.uniform() - 1)};
    case CellType::annular_sector: {
      // area-uniform in radius: r = sqrt(u (r_out^2 - r_in^2) + r_in^2)
      const double r = std::sqrt(rng.uniform() *
                                     (c.r_out * c.r_out - c.r_in * c.r_in) +
                                 c.r_in * c.r_in);
      const double a =
          c.angle_center + c.angle_halfwidth * (2 * rng.uniform() - 1);
      return {r * std::cos(a), r * std::sin(a)};
    }
    case CellType::slab: {
      // rejection inside the bounding box of the clipped slab
      const double ymin_sq = (c.y_lo <= 0.0 && c.y_hi >= 0.0)
                                 ? 0.0
                                 : std::min(c.y_lo * c.y_lo, c.y_hi * c.y_hi);
      const double xmax =
          std::sqrt(std::max(0.0, c.clip_R * c.clip_R - ymin_sq));
      for (;;) {
        const double y = c.y_lo + (c.y_hi - c.y_lo) * rng.uniform();
        const double x = xmax * (2 * rng.uniform() - 1);
        if (x * x + y * y < c.clip_R * c.clip_R) return {x, y};
      }
    }
    case CellType::disk: {
      const double r = c.radius * std::sqrt(rng.uniform());
      const double a = two_pi * rng.uniform();
      return {c.center.x() + r * std::cos(a), c.center.y() + r * std::sin(a)};
    }
    default:
      return c.anchor;
  }
}

// Farthest distance from the origin to any point of the cell.
inline double cell_max_norm(const CoveringCell& c) {
  switch (c.type) {
    case CellType::point:
      return c.anchor.norm();
    case CellType::disk:
      return c.center.norm() + c.radius;
    case CellType::annular_sector:
      return c.r_out;
    case CellType::rectangle: {
      double best = 0;
      for (int sx : {-1, 1})
        for (int sy : {-1, 1})
          best = std::max(best, (c.center + Vec2(sx * c.halfwidth.x(),
                                                 sy * c.halfwidth.y()))
                                    .norm());
      return best;
    }
    case CellType::slab:
      return c.clip_R;
  }
  return 0;
}

// Boundary discretization of cell ∩ B_R for diameter estimation.
inline std::vector<Vec2> boundary_cloud(const CoveringCell& c, double R,
                                        int n) {
  std::vector<Vec2> pts;
  auto push_inside_disk = [&](const Vec2& p) {
    if (p.norm() <= R + 1e-12) pts.push_back(p);
  };
  switch (c.type) {
    case CellType::rectangle: {
      const double x0 = c.center.x() - c.halfwidth.x(),
                   x1 = c.center.x() + c.halfwidth.x();
      const double y0 = c.center.y() - c.halfwidth.y(),
                   y1 = c.center.y() + c.halfwidth.y();
      for (int i = 0; i <= n; ++i) {
        const double t = double(i) / n;
        push_inside_disk({x0 + t * (x1 - x0), y0});
        push_inside_disk({x0 + t * (x1 - x0), y1});
        push_inside_disk({x0, y0 + t * (y1 - y0)});
        push_inside_disk({x1, y0 + t * (y1 - y0)});
      }
      // arc of the R-circle crossing the rectangle
      for (int i = 0; i < 4 * n; ++i) {
        const double a = two_pi * i / (4 * n);
        const Vec2 p{R * std::cos(a), R * std::sin(a)};
        if (p.x() >= x0 - 1e-12 && p.x() <= x1 + 1e-12 &&
            p.y() >= y0 - 1e-12 && p.y() <= y1 + 1e-12)
          pts.push_back(p);
      }
      break;
    }
    case CellType::annular_sector: {
      for (int i = 0; i <= n; ++i) {
        const double t = double(i) / n;
        const double a =
            c.angle_center + c.angle_halfwidth * (2.0 * t - 1.0);
        const double ro = std::min(c.r_out, R);
        pts.push_back({ro * std::cos(a), ro * std::sin(a)});
        pts.push_back({c.r_in * std::cos(a), c.r_in * std::sin(a)});
        // radial edges
        const double r = c.r_in + t * (ro - c.r_in);
        for (double e : {c.angle_center - c.angle_halfwidth,
                         c.angle_center + c.angle_halfwidth})
          pts.push_back({r * std::cos(e), r * std::sin(e)});
      }
      break;
    }
    case CellType::slab: {
      const double Reff = std::min(R, c.clip_R);
      for (int i = 0; i <= n; ++i) {
        const double t = double(i) / n;
        for (double y : {c.y_lo, c.y_hi}) {
          if (std::abs(y) > Reff) continue;
          const double xm = std::sqrt(std::max(0.0, Reff * Reff - y * y));
          pts.push_back({-xm + t * 2 * xm, y});
        }
        // disk arc between the slab lines
        const double a = -pi + two_pi * t;
        const Vec2 p{Reff * std::cos(a), Reff * std::sin(a)};
        if (p.y() >= c.y_lo - 1e-12 && p.y() <= c.y_hi + 1e-12)
          pts.push_back(p);
      }
      break;
    }
    case CellType::disk: {
      for (int i = 0; i < n; ++i) {
        const double a = two_pi * i / n;
        push_inside_disk(c.center + c.radius * Vec2(std::cos(a), std::sin(a)));
        const Vec2 p{R * std::cos(a), R * std::sin(a)};
        if ((p - c.center).norm() <= c.radius + 1e-12) pts.push_back(p);
      }
      break;
    }
    default:
      break;
  }
  return pts;
}

inline double cloud_diameter(const std::vector<Vec2>& pts) {
  double best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, (pts[i] - pts[j]).squaredNorm());
  return std::sqrt(best);
}

// Diameter of cell ∩ B_R via boundary discretization with one refinement.
inline double cell_clipped_diam(const CoveringCell& c, double R) {
  if (c.type == CellType::point) return 0.0;
  double d1 = cloud_diameter(boundary_cloud(c, R, 512));
  double d2 = cloud_diameter(boundary_cloud(c, R, 1024));
  if (d2 > 0 && std::abs(d2 - d1) / d2 > 1e-4)
    d2 = cloud_diameter(boundary_cloud(c, R, 2048));
  return d2;
}

}  // namespace detail

// beta(R) = R sqrt(max_k |I_k ∩ B_R|), gamma(R) = sum diam(I_k ∩ B_R)^2
// |I_k ∩ B_R|. Exact areas for interior cells; stratified Monte-Carlo for
// boundary-straddling ones. Returns infinite parameters when the covering
// does not claim the R-covering property (R > R_cov).
inline QualityParams quality_params(const Covering& cov, double R,
                                    std::uint64_t seed = 1234,
                                    long samples_per_cell = 20000) {
  QualityParams qp;
  qp.R = R;
  if (R <= 0) throw Error("invalid-extent", "R must be positive");
  if (R > cov.R_cov + 1e-12) {
    qp.diagnostic = "not an R-covering: requested R " + std::to_string(R) +
                    " exceeds construction cover radius " +
                    std::to_string(cov.R_cov);
    return qp;  // infinite beta/gamma
  }
  double max_area = 0.0, max_area_hw = 0.0;
  double gamma = 0.0, gamma_hw = 0.0;
  for (const auto& c : cov.cells) {
    if (c.type == CellType::point) continue;
    const double full = c.area();
    double area = 0.0, hw = 0.0;
    const bool interior = detail::cell_max_norm(c) <= R + 1e-12;
    if (interior) {
      area = full;
    } else {
      // stratified sampling: split samples into 16 strata of the cell's own
      // parameter space by sub-sampling with distinct seeds
      const int strata = 16;
      const long per = samples_per_cell / strata;
      double p_sum = 0.0, p2_sum = 0.0;
      for (int s = 0; s < strata; ++s) {
        Rng rng(mix_seed(seed, 1000003ULL * (&c - cov.cells.data()) + s));
        long hits = 0;
        for (long i = 0; i < per; ++i)
          if (detail::sample_cell(c, rng).norm() < R) ++hits;
        const double p = double(hits) / double(per);
        p_sum += p;
        p2_sum += p * p;
      }
      const double p = p_sum / strata;
      const double var =
          std::max(0.0, p2_sum / strata - p * p) / std::max(1, strata - 1);
      area = full * p;
      hw = full * 1.96 * std::sqrt(var);
      qp.samples_used += per * strata;
    }
    if (area > max_area) {
      max_area = area;
      max_area_hw = hw;
    }
    if (area <= 0) continue;
    const double diam = detail::cell_clipped_diam(c, R);
    gamma += diam * diam * area;
    gamma_hw += diam * diam * hw;
  }
  qp.beta = R * std::sqrt(max_area);
  qp.beta_halfwidth =
      max_area > 0 ? R * max_area_hw / (2.0 * std::sqrt(max_area)) : 0.0;
  qp.gamma = gamma;
  qp.gamma_halfwidth = gamma_hw;
  qp.finite = true;
  return qp;
}

// Ordinary least-squares slope of log(value) against log(m).
inline LineFit asymptotic_fit(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3)
    throw Error("insufficient-data", "need at least 3 (m, value) pairs");
  std::vector<double> x, y;
  for (const auto& [m, v] : pairs) {
    if (m <= 0 || v <= 0)
      throw Error("insufficient-data", "m and value must be positive");
    x.push_back(std::log(m));
    y.push_back(std::log(v));
  }
  return fit_line(x, y);
}

}  // namespace tvdoa
