#include "fsmb/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fsmb/dataset.hpp"  // read/write_text_file
#include "fsmb/errors.hpp"

namespace fsmb {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 48;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Range {
  double lo, hi;
};

// round the data range outward to a multiple of a nice step
Range nice_range(double lo, double hi) {
  if (lo > hi) std::swap(lo, hi);
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double span = hi - lo;
  const double raw_step = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * m >= raw_step) {
      step = mag * m;
      break;
    }
  }
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step};
}

}  // namespace

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<CurveSeries>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  const Range xr = nice_range(xmin, xmax);
  const Range yr = nice_range(ymin, ymax);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto sy = [&](double y) { return kTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

  // grid and ticks
  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    svg << "<line x1=\"" << num(sx(xv)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(sx(xv))
        << "\" y2=\"" << num(kTop + plot_h) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(sy(yv)) << "\" x2=\""
        << num(kLeft + plot_w) << "\" y2=\"" << num(sy(yv)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(xv)
        << "</text>\n";
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(sy(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(yv)
        << "</text>\n";
  }
  svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w)
      << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // axis labels
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
      << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kHeight / 2 << ")\">" << y_label << "</text>\n";

  // series
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) svg << " ";
      svg << num(sx(s.x[i])) << "," << num(sy(s.y[i]));
    }
    svg << "\"/>\n";
  }

  // legend, upper right inside the plot
  double ly = kTop + 16;
  for (const auto& s : series) {
    const double lx = kLeft + plot_w - 150;
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 24)
        << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"/>\n";
    svg << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
    ly += 18;
  }
  svg << "</svg>\n";
  return svg.str();
}

void plot_generalization_csv(const std::string& csv_path, const std::string& svg_path) {
  const std::string text = read_text_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("curves CSV '" + csv_path + "': empty file", 0);

  // resolve column positions from the header
  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  auto col_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    throw FormatError("curves CSV '" + csv_path + "': missing column '" + name + "'", 0);
  };
  const int c_epoch = col_of("epoch");
  const int c_base = col_of("base_acc");
  const int c_novel = col_of("novel_acc");

  CurveSeries base{"base generalization", "#1f77b4", {}, {}};
  CurveSeries novel{"novel generalization", "#d62728", {}, {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    const int needed = std::max({c_epoch, c_base, c_novel});
    if (static_cast<int>(fields.size()) <= needed) continue;
    const double epoch = std::stod(fields[c_epoch]);
    base.x.push_back(epoch);
    base.y.push_back(std::stod(fields[c_base]));
    novel.x.push_back(epoch);
    novel.y.push_back(std::stod(fields[c_novel]));
  }
  if (base.x.empty()) throw FormatError("curves CSV '" + csv_path + "': no data rows", 0);

  const std::string svg = render_line_chart_svg("generalization during training", "epoch",
                                                "5-way accuracy (%)", {base, novel});
  write_text_file(svg_path, svg);
}

}  // namespace fsmb
