#include "ctxda/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ctxda/errors.hpp"

namespace ctxda {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 360;
constexpr double kLeft = 56;
constexpr double kRight = 16;
constexpr double kTop = 40;
constexpr double kBottom = 48;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

void open_svg(std::ostringstream& o, const std::string& title, double y_max) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  const double plot_h = kHeight - kTop - kBottom;
  for (int i = 0; i <= 4; ++i) {
    const double y = kTop + plot_h * (1.0 - i / 4.0);
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << num(y)
      << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
      << num(y_max * i / 4.0) << "</text>\n";
  }
}

}  // namespace

std::string bar_chart_svg(const std::string& title, std::span<const std::string> labels,
                          std::span<const double> values) {
  if (labels.size() != values.size()) throw UsageError("bar chart needs one label per value");
  double y_max = 0.0;
  for (double v : values) y_max = std::max(y_max, v);
  if (y_max <= 0.0) y_max = 1.0;
  std::ostringstream o;
  open_svg(o, title, y_max);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double slot = values.empty() ? plot_w : plot_w / static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = plot_h * std::max(0.0, values[i]) / y_max;
    const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h - h) << "\" width=\""
      << num(slot * 0.7) << "\" height=\"" << num(h) << "\" fill=\"" << kColors[0] << "\"/>\n";
    o << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(kHeight - kBottom + 18)
      << "\" text-anchor=\"middle\">" << escape(labels[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_chart_svg(const std::string& title, std::span<const LineSeries> series) {
  double y_max = 0.0;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) y_max = std::max(y_max, v);
  }
  if (y_max <= 0.0) y_max = 1.0;
  std::ostringstream o;
  open_svg(o, title, y_max);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double dx = n > 1 ? plot_w / static_cast<double>(n - 1) : 0.0;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kColors[si % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[si].values.size(); ++i) {
      if (i > 0) o << ' ';
      o << num(kLeft + dx * static_cast<double>(i)) << ','
        << num(kTop + plot_h * (1.0 - series[si].values[i] / y_max));
    }
    o << "\"/>\n";
    const double ly = kHeight - 14.0;
    const double lx = kLeft + 140.0 * static_cast<double>(si);
    o << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 18) << "\" y1=\"" << num(ly - 4)
      << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(lx + 22) << "\" y=\"" << num(ly) << "\">" << escape(series[si].name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ctxda
