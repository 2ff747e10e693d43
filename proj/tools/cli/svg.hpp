// Copyright 2026 The otbayes Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef OTBAYES_CLI_SVG_HPP
#define OTBAYES_CLI_SVG_HPP

// Minimal SVG plotter: scatter, polyline and histogram layers on linear axes.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <otbayes/common.hpp>

namespace otbayes::cli {

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void scatter(std::vector<double> x, std::vector<double> y, std::string color, std::string label) {
    layers_.push_back({Kind::kScatter, std::move(x), std::move(y), std::move(color), std::move(label)});
  }

  void line(std::vector<double> x, std::vector<double> y, std::string color, std::string label) {
    layers_.push_back({Kind::kLine, std::move(x), std::move(y), std::move(color), std::move(label)});
  }

  /// `edges` has one more entry than `heights`.
  void histogram(std::vector<double> edges, std::vector<double> heights, std::string color, std::string label) {
    if (edges.size() != heights.size() + 1) throw Error("svg: histogram needs one more edge than bins");
    layers_.push_back({Kind::kHistogram, std::move(edges), std::move(heights), std::move(color), std::move(label)});
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << render();
  }

  [[nodiscard]] std::string render() const {
    double x0 = std::numeric_limits<double>::infinity();
    double x1 = -x0;
    double y0 = x0;
    double y1 = -x0;
    for (const auto& l : layers_) {
      for (double v : l.x) {
        if (std::isfinite(v)) x0 = std::min(x0, v), x1 = std::max(x1, v);
      }
      for (double v : l.y) {
        if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
      }
      if (l.kind == Kind::kHistogram) y0 = std::min(y0, 0.0);
    }
    if (!(x1 > x0)) x0 -= 1.0, x1 += 1.0;
    if (!(y1 > y0)) y0 -= 1.0, y1 += 1.0;
    const double pad = 0.05 * (y1 - y0);
    y1 += pad;
    if (y0 != 0.0) y0 -= pad;

    const auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * (kWidth - kLeft - kRight); };
    const auto py = [&](double v) { return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom); };

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title_)
       << "</text>\n";
    for (const auto& l : layers_) {
      switch (l.kind) {
        case Kind::kScatter:
          for (std::size_t i = 0; i < l.x.size(); ++i) {
            os << "<circle cx=\"" << px(l.x[i]) << "\" cy=\"" << py(l.y[i]) << "\" r=\"1.5\" fill=\"" << l.color
               << "\" fill-opacity=\"0.5\"/>\n";
          }
          break;
        case Kind::kLine: {
          os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"1.5\" points=\"";
          for (std::size_t i = 0; i < l.x.size(); ++i) os << px(l.x[i]) << ',' << py(l.y[i]) << ' ';
          os << "\"/>\n";
          break;
        }
        case Kind::kHistogram:
          for (std::size_t i = 0; i + 1 < l.x.size(); ++i) {
            const double top = py(l.y[i]);
            os << "<rect x=\"" << px(l.x[i]) << "\" y=\"" << top << "\" width=\"" << px(l.x[i + 1]) - px(l.x[i])
               << "\" height=\"" << py(y0) - top << "\" fill=\"" << l.color << "\" fill-opacity=\"0.4\" stroke=\""
               << l.color << "\" stroke-width=\"0.5\"/>\n";
          }
          break;
      }
    }
    // Axes and ticks.
    os << "<line x1=\"" << kLeft << "\" y1=\"" << py(y0) << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << py(y0)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"black\"/>\n";
    for (double t : ticks(x0, x1)) {
      os << "<line x1=\"" << px(t) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(t) << "\" y2=\"" << py(y0) + 4
         << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << py(y0) + 16 << "\" text-anchor=\"middle\">"
         << t << "</text>\n";
    }
    for (double t : ticks(y0, y1)) {
      os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft << "\" y2=\"" << py(t)
         << "\" stroke=\"black\"/><text x=\"" << kLeft - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
         << t << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 8 << "\" text-anchor=\"middle\">"
       << escape(x_label_) << "</text>\n";
    os << "<text x=\"14\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14,"
       << (kTop + kHeight - kBottom) / 2 << ")\">" << escape(y_label_) << "</text>\n";
    double ly = kTop + 10;
    for (const auto& l : layers_) {
      if (l.label.empty()) continue;
      os << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
         << l.color << "\"/><text x=\"" << kWidth - kRight - 135 << "\" y=\"" << ly << "\">" << escape(l.label)
         << "</text>\n";
      ly += 16;
    }
    os << "</svg>\n";
    return os.str();
  }

 private:
  enum class Kind { kScatter, kLine, kHistogram };
  struct Layer {
    Kind kind;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    std::string label;
  };

  static constexpr double kWidth = 640;
  static constexpr double kHeight = 420;
  static constexpr double kLeft = 60;
  static constexpr double kRight = 20;
  static constexpr double kTop = 32;
  static constexpr double kBottom = 44;

  static std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
      out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return out;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') {
        out += "&lt;";
      } else if (c == '>') {
        out += "&gt;";
      } else if (c == '&') {
        out += "&amp;";
      } else {
        out += c;
      }
    }
    return out;
  }

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Layer> layers_;
};

}  // namespace otbayes::cli

#endif  // OTBAYES_CLI_SVG_HPP
