#pragma once

// Minimal deterministic SVG line charts; byte-identical output for identical
// input.

#include <string>
#include <vector>

namespace fsmb {

struct CurveSeries {
  std::string label;
  std::string color;  // SVG color string
  std::vector<double> x;
  std::vector<double> y;
};

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<CurveSeries>& series);

// Reads a metrics CSV (as written by the trainers) and renders the
// base-generalization vs novel-generalization curves.
void plot_generalization_csv(const std::string& csv_path, const std::string& svg_path);

}  // namespace fsmb
