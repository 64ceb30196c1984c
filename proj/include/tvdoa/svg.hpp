#pragma once
// Minimal self-contained SVG plot writer: polylines, stems, scatter points,
// error bars, linear or log10 axes with tick labels. No external
// dependencies; output is a single standalone .svg file per plot.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tvdoa/geometry.hpp"  // Error

namespace tvdoa {

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel,
          bool logx = false, bool logy = false)
      : title_(std::move(title)),
        xlabel_(std::move(xlabel)),
        ylabel_(std::move(ylabel)),
        logx_(logx),
        logy_(logy) {}

  void add_polyline(const std::vector<double>& xs,
                    const std::vector<double>& ys, const std::string& color,
                    const std::string& legend = "") {
    series_.push_back({Kind::line, xs, ys, {}, color, legend});
    grow_range(xs, ys);
  }

  void add_points(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color, const std::string& legend = "") {
    series_.push_back({Kind::points, xs, ys, {}, color, legend});
    grow_range(xs, ys);
  }

  // Vertical stems from the baseline (y=0 on linear axes, bottom on log).
  void add_stems(const std::vector<double>& xs, const std::vector<double>& ys,
                 const std::string& color, const std::string& legend = "") {
    series_.push_back({Kind::stems, xs, ys, {}, color, legend});
    grow_range(xs, ys);
    if (!logy_) {
      ymin_ = std::min(ymin_, 0.0);
      ymax_ = std::max(ymax_, 0.0);
    }
  }

  // Symmetric vertical error bars: y +/- half.
  void add_errorbars(const std::vector<double>& xs,
                     const std::vector<double>& ys,
                     const std::vector<double>& half,
                     const std::string& color) {
    series_.push_back({Kind::bars, xs, ys, half, color, ""});
    for (size_t i = 0; i < xs.size(); ++i) {
      grow_range({xs[i]}, {ys[i] - half[i], ys[i] + half[i]});
    }
  }

  void add_vline(double x, const std::string& color) {
    vlines_.push_back({x, color});
    grow_range({x}, {});
  }

  void write(const std::string& path) const {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path);
    if (!f) throw Error("io-open-failed", "cannot write " + path);
    f << render();
  }

  std::string render() const {
    double x0 = xmin_, x1 = xmax_, y0 = ymin_, y1 = ymax_;
    pad_range(x0, x1, logx_);
    pad_range(y0, y1, logy_);
    std::ostringstream s;
    s << std::setprecision(8);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W_
      << "\" height=\"" << H_ << "\" viewBox=\"0 0 " << W_ << ' ' << H_
      << "\">\n";
    s << "<rect width=\"" << W_ << "\" height=\"" << H_
      << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << W_ / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << esc(title_)
      << "</text>\n";
    draw_axes(s, x0, x1, y0, y1);
    for (const auto& v : vlines_) {
      const double px = map_x(v.x, x0, x1);
      s << "<line x1=\"" << px << "\" y1=\"" << pt_ << "\" x2=\"" << px
        << "\" y2=\"" << H_ - pb_ << "\" stroke=\"" << v.color
        << "\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>\n";
    }
    for (const auto& ser : series_) draw_series(s, ser, x0, x1, y0, y1);
    draw_legend(s);
    s << "</svg>\n";
    return s.str();
  }

 private:
  enum class Kind { line, points, stems, bars };
  struct Series {
    Kind kind;
    std::vector<double> xs, ys, half;
    std::string color, legend;
  };
  struct VLine {
    double x;
    std::string color;
  };

  static std::string esc(const std::string& t) {
    std::string o;
    for (char c : t) {
      if (c == '<')
        o += "&lt;";
      else if (c == '>')
        o += "&gt;";
      else if (c == '&')
        o += "&amp;";
      else
        o += c;
    }
    return o;
  }

  void grow_range(const std::vector<double>& xs,
                  const std::vector<double>& ys) {
    for (double x : xs)
      if (std::isfinite(x) && (!logx_ || x > 0)) {
        xmin_ = std::min(xmin_, x);
        xmax_ = std::max(xmax_, x);
      }
    for (double y : ys)
      if (std::isfinite(y) && (!logy_ || y > 0)) {
        ymin_ = std::min(ymin_, y);
        ymax_ = std::max(ymax_, y);
      }
  }

  static void pad_range(double& lo, double& hi, bool logscale) {
    if (lo > hi) {
      lo = logscale ? 0.1 : 0.0;
      hi = 1.0;
    }
    if (logscale) {
      lo = std::log10(lo);
      hi = std::log10(hi);
    }
    double span = hi - lo;
    if (span <= 0) span = std::max(1.0, std::abs(hi));
    lo -= 0.06 * span;
    hi += 0.06 * span;
  }

  // Inputs x0,x1 (y0,y1) are already log10-transformed when the axis is log.
  double map_x(double x, double x0, double x1) const {
    const double fx = logx_ ? std::log10(std::max(x, 1e-300)) : x;
    return pl_ + (fx - x0) / (x1 - x0) * (W_ - pl_ - pr_);
  }
  double map_y(double y, double y0, double y1) const {
    const double fy = logy_ ? std::log10(std::max(y, 1e-300)) : y;
    return H_ - pb_ - (fy - y0) / (y1 - y0) * (H_ - pt_ - pb_);
  }

  static std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(4) << v;
    return o.str();
  }

  void draw_axes(std::ostringstream& s, double x0, double x1, double y0,
                 double y1) const {
    s << "<rect x=\"" << pl_ << "\" y=\"" << pt_ << "\" width=\""
      << W_ - pl_ - pr_ << "\" height=\"" << H_ - pt_ - pb_
      << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    const int nticks = 6;
    for (int i = 0; i < nticks; ++i) {
      const double tx = x0 + (x1 - x0) * (i + 0.5) / nticks;
      const double vx = logx_ ? std::pow(10.0, tx) : tx;
      const double px = pl_ + (tx - x0) / (x1 - x0) * (W_ - pl_ - pr_);
      s << "<line x1=\"" << px << "\" y1=\"" << H_ - pb_ << "\" x2=\"" << px
        << "\" y2=\"" << H_ - pb_ + 5 << "\" stroke=\"#444\"/>\n";
      s << "<text x=\"" << px << "\" y=\"" << H_ - pb_ + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt(vx) << "</text>\n";
      const double ty = y0 + (y1 - y0) * (i + 0.5) / nticks;
      const double vy = logy_ ? std::pow(10.0, ty) : ty;
      const double py = H_ - pb_ - (ty - y0) / (y1 - y0) * (H_ - pt_ - pb_);
      s << "<line x1=\"" << pl_ - 5 << "\" y1=\"" << py << "\" x2=\"" << pl_
        << "\" y2=\"" << py << "\" stroke=\"#444\"/>\n";
      s << "<text x=\"" << pl_ - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt(vy) << "</text>\n";
    }
    s << "<text x=\"" << (pl_ + W_ - pr_) / 2 << "\" y=\"" << H_ - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << esc(xlabel_) << "</text>\n";
    s << "<text x=\"16\" y=\"" << (pt_ + H_ - pb_) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 16 "
      << (pt_ + H_ - pb_) / 2 << ")\">" << esc(ylabel_) << "</text>\n";
  }

  void draw_series(std::ostringstream& s, const Series& ser, double x0,
                   double x1, double y0, double y1) const {
    if (ser.kind == Kind::line) {
      s << "<polyline fill=\"none\" stroke=\"" << ser.color
        << "\" stroke-width=\"1.6\" points=\"";
      for (size_t i = 0; i < ser.xs.size(); ++i)
        s << map_x(ser.xs[i], x0, x1) << ',' << map_y(ser.ys[i], y0, y1)
          << ' ';
      s << "\"/>\n";
    } else if (ser.kind == Kind::points) {
      for (size_t i = 0; i < ser.xs.size(); ++i)
        s << "<circle cx=\"" << map_x(ser.xs[i], x0, x1) << "\" cy=\""
          << map_y(ser.ys[i], y0, y1) << "\" r=\"3\" fill=\"" << ser.color
          << "\"/>\n";
    } else if (ser.kind == Kind::stems) {
      const double base =
          logy_ ? H_ - pb_ : map_y(0.0, y0, y1);
      for (size_t i = 0; i < ser.xs.size(); ++i) {
        const double px = map_x(ser.xs[i], x0, x1);
        const double py = map_y(ser.ys[i], y0, y1);
        s << "<line x1=\"" << px << "\" y1=\"" << base << "\" x2=\"" << px
          << "\" y2=\"" << py << "\" stroke=\"" << ser.color
          << "\" stroke-width=\"1.6\"/>\n";
        s << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\""
          << ser.color << "\"/>\n";
      }
    } else {
      for (size_t i = 0; i < ser.xs.size(); ++i) {
        const double px = map_x(ser.xs[i], x0, x1);
        const double plo = map_y(ser.ys[i] - ser.half[i], y0, y1);
        const double phi = map_y(ser.ys[i] + ser.half[i], y0, y1);
        s << "<line x1=\"" << px << "\" y1=\"" << plo << "\" x2=\"" << px
          << "\" y2=\"" << phi << "\" stroke=\"" << ser.color
          << "\" stroke-width=\"1.2\"/>\n";
        s << "<line x1=\"" << px - 4 << "\" y1=\"" << plo << "\" x2=\""
          << px + 4 << "\" y2=\"" << plo << "\" stroke=\"" << ser.color
          << "\"/>\n";
        s << "<line x1=\"" << px - 4 << "\" y1=\"" << phi << "\" x2=\""
          << px + 4 << "\" y2=\"" << phi << "\" stroke=\"" << ser.color
          << "\"/>\n";
      }
    }
  }

  void draw_legend(std::ostringstream& s) const {
    double y = pt_ + 14;
    for (const auto& ser : series_) {
      if (ser.legend.empty()) continue;
      s << "<line x1=\"" << W_ - pr_ - 130 << "\" y1=\"" << y - 4
        << "\" x2=\"" << W_ - pr_ - 110 << "\" y2=\"" << y - 4
        << "\" stroke=\"" << ser.color << "\" stroke-width=\"2\"/>\n";
      s << "<text x=\"" << W_ - pr_ - 104 << "\" y=\"" << y
        << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << esc(ser.legend) << "</text>\n";
      y += 16;
    }
  }

  std::string title_, xlabel_, ylabel_;
  bool logx_, logy_;
  double xmin_ = std::numeric_limits<double>::infinity(),
         xmax_ = -std::numeric_limits<double>::infinity(),
         ymin_ = std::numeric_limits<double>::infinity(),
         ymax_ = -std::numeric_limits<double>::infinity();
  std::vector<Series> series_;
  std::vector<VLine> vlines_;
  static constexpr double W_ = 820, H_ = 560;
  static constexpr double pl_ = 74, pr_ = 24, pt_ = 44, pb_ = 58;
};

}  // namespace tvdoa
