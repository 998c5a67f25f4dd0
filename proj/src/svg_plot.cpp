#include "hpoerm/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hpoerm/csv.hpp"

namespace hpoerm {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;  // in transformed units
  double hi = 1.0;

  double transform(double v) const { return log ? std::log10(v) : v; }
  bool drawable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis fit_axis(bool log, const std::vector<double>& values) {
  Axis a;
  a.log = log;
  double lo = INFINITY, hi = -INFINITY;
  for (const double v : values) {
    if (!a.drawable(v)) continue;
    lo = std::min(lo, a.transform(v));
    hi = std::max(hi, a.transform(v));
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (log) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
    if (hi <= lo) hi = lo + 1.0;
  } else {
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

std::vector<double> ticks(const Axis& a) {
  std::vector<double> t;
  if (a.log) {
    for (double e = a.lo; e <= a.hi + 1e-9; e += 1.0) t.push_back(e);
  } else {
    for (int i = 0; i <= 4; ++i) t.push_back(a.lo + (a.hi - a.lo) * i / 4.0);
  }
  return t;
}

std::string tick_label(const Axis& a, double t) {
  if (a.log) return "1e" + std::to_string(static_cast<int>(std::lround(t)));
  std::ostringstream s;
  s.precision(3);
  s << t;
  return s.str();
}

}  // namespace

std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      ys.push_back(s.y[i]);
      if (i < s.y_err.size()) {
        ys.push_back(s.y[i] + s.y_err[i]);
        ys.push_back(s.y[i] - s.y_err[i]);
      }
    }
  }
  const Axis ax = fit_axis(spec.log_x, xs);
  const Axis ay = fit_axis(spec.log_y, ys);

  const double left = 70, right = 150, top = 40, bottom = 55;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto px = [&](double v) { return left + (ax.transform(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) {
    const double t = std::clamp(ay.transform(v), ay.lo, ay.hi);
    return top + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
    << "</text>\n";

  for (const double t : ticks(ax)) {
    const double x = left + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    o << "<line x1=\"" << format_double(x) << "\" y1=\"" << top << "\" x2=\"" << format_double(x) << "\" y2=\""
      << top + ph << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << format_double(x) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
      << tick_label(ax, t) << "</text>\n";
  }
  for (const double t : ticks(ay)) {
    const double y = top + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    o << "<line x1=\"" << left << "\" y1=\"" << format_double(y) << "\" x2=\"" << left + pw << "\" y2=\""
      << format_double(y) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << format_double(y + 4) << "\" text-anchor=\"end\">"
      << tick_label(ay, t) << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << spec.height - 12 << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::ostringstream path;
    int drawn = 0;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.drawable(s.x[i]) || !ay.drawable(s.y[i])) continue;
      const double x = px(s.x[i]), y = py(s.y[i]);
      path << (drawn == 0 ? "M" : " L") << format_double(x) << ' ' << format_double(y);
      o << "<circle cx=\"" << format_double(x) << "\" cy=\"" << format_double(y) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
      if (i < s.y_err.size() && s.y_err[i] > 0.0) {
        const double lo = s.y[i] - s.y_err[i];
        const double y_lo = ay.drawable(lo) ? py(lo) : top + ph;
        o << "<line x1=\"" << format_double(x) << "\" y1=\"" << format_double(py(s.y[i] + s.y_err[i])) << "\" x2=\""
          << format_double(x) << "\" y2=\"" << format_double(y_lo) << "\" stroke=\"" << color << "\"/>\n";
      }
      ++drawn;
    }
    if (drawn > 1) {
      o << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << format_double(ly) << "\" x2=\"" << left + pw + 30
      << "\" y2=\"" << format_double(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 36 << "\" y=\"" << format_double(ly + 4) << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hpoerm
