#include "satlab/plots.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace satlab {

namespace {

constexpr int kWidth = 320, kHeight = 240, kMargin = 24;

struct Canvas {
  std::vector<unsigned char> rgb = std::vector<unsigned char>(std::size_t(kWidth) * kHeight * 3, 255);

  void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || y < 0 || x >= kWidth || y >= kHeight) return;
    const std::size_t i = (std::size_t(y) * kWidth + std::size_t(x)) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }

  void line(int x0, int y0, int x1, int y1, unsigned char r, unsigned char g, unsigned char b) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_ppm(const Sweep& s, const std::filesystem::path& path) {
  Canvas c;
  const auto [xmin, xmax] = std::minmax_element(s.x.begin(), s.x.end());
  const auto [ymin, ymax] = std::minmax_element(s.y.begin(), s.y.end());
  const double x0 = *xmin, xr = *xmax > *xmin ? *xmax - *xmin : 1.0;
  const double y0 = std::min(*ymin, 0.0), yr = std::max(*ymax, y0 + 1.0) - y0;
  auto px = [&](double x) { return kMargin + int(std::lround((x - x0) / xr * (kWidth - 2 * kMargin))); };
  auto py = [&](double y) { return kHeight - kMargin - int(std::lround((y - y0) / yr * (kHeight - 2 * kMargin))); };
  c.line(kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin, 0, 0, 0);
  c.line(kMargin, kMargin, kMargin, kHeight - kMargin, 0, 0, 0);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const int X = px(s.x[i]), Y = py(s.y[i]);
    if (i > 0) c.line(px(s.x[i - 1]), py(s.y[i - 1]), X, Y, 31, 119, 180);
    for (int d = -2; d <= 2; ++d) {
      c.set(X + d, Y, 214, 39, 40);
      c.set(X, Y + d, 214, 39, 40);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "P6\n" << kWidth << " " << kHeight << "\n255\n";
  out.write(reinterpret_cast<const char*>(c.rgb.data()), std::streamsize(c.rgb.size()));
  if (!out) throw Error("failed writing plot: " + path.string());
}

void write_tsv(const Sweep& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "# " << s.name << "\n" << s.x_label << "\t" << s.y_label << "\n";
  for (std::size_t i = 0; i < s.x.size(); ++i) out << fmt(s.x[i]) << "\t" << fmt(s.y[i]) << "\n";
  if (!out) throw Error("failed writing sidecar: " + path.string());
}

}  // namespace

std::vector<Sweep> report_sweeps(const RobustnessReport& r) {
  std::vector<Sweep> out = r.sweeps;
  if (r.obfuscation) out.insert(out.end(), r.obfuscation->sweeps.begin(), r.obfuscation->sweeps.end());
  if (r.corruptions) {
    for (const auto& [name, acc] : r.corruptions->accuracy) {
      Sweep s{"corruption-" + name, "severity", "accuracy (%)", {}, acc};
      for (int v : r.corruptions->severities) s.x.push_back(v);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string plot_stem(const std::string& name) {
  std::string s;
  for (char ch : name) {
    const char c = char(std::tolower(static_cast<unsigned char>(ch)));
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      s += c;
    } else if (!s.empty() && s.back() != '-') {
      s += '-';
    }
  }
  while (!s.empty() && s.back() == '-') s.pop_back();
  return s.empty() ? "sweep" : s;
}

PlotOutcome write_plots(const RobustnessReport& r, const std::filesystem::path& dir) {
  PlotOutcome out;
  const auto sweeps = report_sweeps(r);
  if (sweeps.empty()) {
    out.warnings.push_back("report has no sweeps to plot");
    return out;
  }
  std::filesystem::create_directories(dir);
  std::vector<std::string> used;
  for (const auto& s : sweeps) {
    const bool finite = std::all_of(s.x.begin(), s.x.end(), [](double v) { return std::isfinite(v); }) &&
                        std::all_of(s.y.begin(), s.y.end(), [](double v) { return std::isfinite(v); });
    if (s.x.empty() || s.x.size() != s.y.size() || !finite) {
      out.warnings.push_back("skipping '" + s.name + "': no plottable data");
      continue;
    }
    std::string stem = plot_stem(s.name);
    for (int k = 2; std::find(used.begin(), used.end(), stem) != used.end(); ++k) stem = plot_stem(s.name) + "-" + std::to_string(k);
    used.push_back(stem);
    write_ppm(s, dir / (stem + ".ppm"));
    write_tsv(s, dir / (stem + ".tsv"));
    out.written.push_back(dir / (stem + ".ppm"));
    out.written.push_back(dir / (stem + ".tsv"));
  }
  return out;
}

Sweep read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sidecar: " + path.string());
  Sweep s;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw FormatError("sidecar lacks a name line");
  s.name = line.substr(2);
  if (!std::getline(in, line)) throw FormatError("sidecar lacks a header");
  const auto tab = line.find('\t');
  s.x_label = line.substr(0, tab);
  s.y_label = tab == std::string::npos ? "" : line.substr(tab + 1);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double x = 0, y = 0;
    if (!(ls >> x >> y)) throw FormatError("bad sidecar row: " + line);
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

}  // namespace satlab
