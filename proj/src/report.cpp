#include "augnet/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "augnet/error.hpp"

namespace augnet {

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string epochs_csv(const std::vector<EpochRecord>& history, const std::vector<std::size_t>& transforms_per_layer) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_acc,test_acc";
  for (std::size_t l = 0; l < transforms_per_layer.size(); ++l) {
    for (std::size_t q = 0; q < transforms_per_layer[l]; ++q) {
      out << ",w_" << l << '_' << q << ",mu_" << l << '_' << q << ",range_" << l << '_' << q;
    }
  }
  out << '\n';
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_acc) << ','
        << format_double(r.val_acc) << ',' << format_double(r.test_acc);
    for (std::size_t l = 0; l < transforms_per_layer.size(); ++l) {
      for (std::size_t q = 0; q < transforms_per_layer[l]; ++q) {
        out << ',' << format_double(r.weights.at(l).at(q)) << ',' << format_double(r.magnitudes.at(l).at(q)) << ','
            << format_double(r.ranges.at(l).at(q));
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

std::string svg_line_charts(const std::vector<Panel>& panels) {
  constexpr double width = 720, height = 300, left = 70, right = 180, top = 36, bottom = 46;
  std::ostringstream svg;
  const double total = height * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << total
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double y0 = height * static_cast<double>(p);
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : panel.series) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return y0 + top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    svg << "<text x=\"" << left << "\" y=\"" << y0 + 22 << "\" font-size=\"14\">" << escape(panel.title) << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << y0 + top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = xmin + (xmax - xmin) * t / 4.0, fy = ymin + (ymax - ymin) * t / 4.0;
      svg << "<text x=\"" << px(fx) << "\" y=\"" << y0 + top + ph + 16 << "\" text-anchor=\"middle\">" << num(fx)
          << "</text>\n";
      svg << "<text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
      svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(fy) << "\" y2=\"" << py(fy)
          << "\" stroke=\"#ddd\"/>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 + height - 8 << "\" text-anchor=\"middle\">"
        << escape(panel.x_label) << "</text>\n";
    svg << "<text transform=\"translate(16," << y0 + top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(panel.y_label) << "</text>\n";
    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const auto& s = panel.series[k];
      const char* color = kPalette[k % std::size(kPalette)];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      }
      svg << "\"/>\n";
      const double ly = y0 + top + 14 + 16 * static_cast<double>(k);
      svg << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 28 << "\" y1=\"" << ly - 4 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << left + pw + 32 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace augnet
