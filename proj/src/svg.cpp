#include "lirr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lirr/errors.hpp"

namespace lirr {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SvgCurve emit_curve_svg(const std::vector<CellSummary>& summary, TaskKind kind) {
  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  std::vector<double> ratios;
  for (const CellSummary& s : summary) {
    if (std::isnan(s.mean_tgt)) continue;
    std::string label = s.method;
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& x) { return x.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(s.ratio, s.mean_tgt);
    if (std::find(ratios.begin(), ratios.end(), s.ratio) == ratios.end()) ratios.push_back(s.ratio);
  }
  if (series.empty()) throw ContractError("emit_curve_svg: no successful cells to plot");
  for (Series& s : series) std::stable_sort(s.points.begin(), s.points.end());

  SvgCurve out;
  const bool scatter = ratios.size() < 2;
  if (scatter) out.warning = "only one labeled-ratio point; drawing a scatter instead of curves";

  double x0 = *std::min_element(ratios.begin(), ratios.end());
  double x1 = *std::max_element(ratios.begin(), ratios.end());
  double y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series) {
    for (const auto& p : s.points) {
      y0 = std::min(y0, p.second);
      y1 = std::max(y1, p.second);
    }
  }
  if (x1 <= x0) {
    x0 -= 0.5 * std::max(std::fabs(x0), 0.01);
    x1 += 0.5 * std::max(std::fabs(x1), 0.01);
  }
  const double pad = std::max(0.05 * (y1 - y0), 0.005);
  y0 -= pad;
  y1 += pad;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  // Axes and ticks.
  os << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(kLeft + pw)
     << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n"
     << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
     << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  for (double r : sorted) {
    os << "<text x=\"" << fmt(sx(r)) << "\" y=\"" << fmt(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << short_double(r) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(sy(v) + 4)
       << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 18)
     << "\" text-anchor=\"middle\" font-size=\"13\">ratio of labeled target data</text>\n"
     << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" "
     << "transform=\"rotate(-90 18 " << fmt(kTop + ph / 2) << ")\">"
     << (kind == TaskKind::Regression ? "MAE" : "accuracy") << "</text>\n</g>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    if (!scatter && s.points.size() >= 2) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
         << "data-method=\"" << escape(s.label) << "\" points=\"";
      for (std::size_t j = 0; j < s.points.size(); ++j) {
        if (j) os << ' ';
        os << fmt(sx(s.points[j].first)) << ',' << fmt(sy(s.points[j].second));
      }
      os << "\"/>\n";
      ++out.polylines;
    }
    for (const auto& p : s.points) {
      os << "<circle cx=\"" << fmt(sx(p.first)) << "\" cy=\"" << fmt(sy(p.second))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << fmt(kWidth - kRight + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\""
       << fmt(kWidth - kRight + 35) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << fmt(kWidth - kRight + 40) << "\" y=\"" << fmt(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  out.svg = os.str();
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace lirr
