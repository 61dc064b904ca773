#pragma once

// Minimal static SVG line plots and overlaid histograms.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace freqdoor {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {
inline std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

inline std::string tick(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline const char* palette(std::size_t i) {
  static const char* c[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return c[i % 6];
}

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }

  std::string axes(const std::string& title, const std::string& xl, const std::string& yl) const {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) + "</text>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
      s += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
      s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
      s += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(py(yv)) + "\" stroke=\"#ddd\"/>\n";
    }
    s += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 12) + "\" text-anchor=\"middle\">" + xml_escape(xl) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num((T + H - B) / 2) + ")\">" + xml_escape(yl) + "</text>\n";
    return s;
  }
};

inline void extent(const std::vector<double>& v, double& lo, double& hi) {
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

inline std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = 50 + 16.0 * double(i);
    s += "<rect x=\"500\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"10\" fill=\"" + palette(i) + "\"/>\n";
    s += "<text x=\"518\" y=\"" + num(y) + "\">" + xml_escape(names[i]) + "</text>\n";
  }
  return s;
}
}  // namespace detail

inline std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<Series>& series) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    detail::extent(s.x, x0, x1);
    detail::extent(s.y, y0, y1);
  }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  const detail::Frame f{x0, x1, y0, y1};
  std::string out = f.axes(title, xlabel, ylabel);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.name);
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      pts += detail::num(f.px(s.x[i])) + "," + detail::num(f.py(s.y[i])) + " ";
    out += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(detail::palette(k)) + "\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      out += "<circle r=\"3\" cx=\"" + detail::num(f.px(s.x[i])) + "\" cy=\"" + detail::num(f.py(s.y[i])) +
             "\" fill=\"" + detail::palette(k) + "\"/>\n";
  }
  return out + detail::legend(names) + "</svg>\n";
}

/// Overlaid normalised histograms (step outlines) sharing one bin grid.
inline std::string svg_histogram(const std::string& title, const std::string& xlabel,
                                 const std::vector<std::pair<std::string, std::vector<double>>>& samples,
                                 int bins = 30) {
  double lo = 1e300, hi = -1e300;
  for (const auto& [n, v] : samples) detail::extent(v, lo, hi);
  if (!(hi > lo)) { lo -= 0.5; hi += 0.5; }
  std::vector<std::vector<double>> h;
  double ymax = 0;
  for (const auto& [n, v] : samples) {
    std::vector<double> c(std::size_t(bins), 0.0);
    for (double x : v) {
      const long k = std::clamp<long>(long((x - lo) / (hi - lo) * bins), 0, bins - 1);
      c[std::size_t(k)] += v.empty() ? 0.0 : 1.0 / double(v.size());
    }
    for (double y : c) ymax = std::max(ymax, y);
    h.push_back(std::move(c));
  }
  const detail::Frame f{lo, hi, 0.0, ymax > 0 ? ymax : 1.0};
  std::string out = f.axes(title, xlabel, "fraction");
  std::vector<std::string> names;
  const double bw = (hi - lo) / bins;
  for (std::size_t k = 0; k < h.size(); ++k) {
    names.push_back(samples[k].first);
    for (int b = 0; b < bins; ++b) {
      const double y = h[k][std::size_t(b)];
      if (y <= 0) continue;
      const double xa = f.px(lo + b * bw), xb = f.px(lo + (b + 1) * bw);
      out += "<rect x=\"" + detail::num(xa) + "\" y=\"" + detail::num(f.py(y)) + "\" width=\"" + detail::num(xb - xa) +
             "\" height=\"" + detail::num(f.py(0) - f.py(y)) + "\" fill=\"" + detail::palette(k) +
             "\" fill-opacity=\"0.45\"/>\n";
    }
  }
  return out + detail::legend(names) + "</svg>\n";
}

}  // namespace freqdoor
