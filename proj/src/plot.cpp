#include "qvdp/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "qvdp/errors.hpp"

namespace qvdp {

namespace {

using Rgb = std::array<double, 3>;

std::string hex(const Rgb& c) {
  char buf[8];
  auto b = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", b(c[0]), b(c[1]), b(c[2]));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// HSV wheel: -pi and pi map to the same colour.
Rgb cyclic_map(double phase) {
  double h = std::fmod((phase + std::numbers::pi) / (2 * std::numbers::pi), 1.0);
  if (h < 0) h += 1.0;
  const double s = 0.85, v = 0.95;
  const double f = h * 6.0;
  const int i = static_cast<int>(f) % 6;
  const double r = f - std::floor(f);
  const double p = v * (1 - s), q = v * (1 - s * r), t = v * (1 - s * (1 - r));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Rgb lerp_map(const std::vector<Rgb>& stops, double t) {
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const size_t k = std::min(static_cast<size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  Rgb c;
  for (int i = 0; i < 3; ++i) c[i] = stops[k][i] + f * (stops[k + 1][i] - stops[k][i]);
  return c;
}

// Viridis anchors.
const std::vector<Rgb> kSequential = {
    {0.267, 0.005, 0.329}, {0.229, 0.322, 0.546}, {0.128, 0.567, 0.551}, {0.369, 0.789, 0.383}, {0.993, 0.906, 0.144}};
const std::vector<Rgb> kDiverging = {{0.02, 0.19, 0.38}, {0.57, 0.77, 0.87}, {0.97, 0.97, 0.97}, {0.96, 0.65, 0.51},
                                     {0.40, 0.0, 0.12}};
const std::vector<std::string> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                           "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

bool looks_like_phase(const std::string& name) {
  return name == "phi" || name == "phi_random" || (name.size() >= 5 && name.substr(name.size() - 5) == "phase");
}

struct Frame {
  double left = 80, top = 50, right, bottom;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : 0.5 * std::abs(lo);
    lo -= pad;
    hi += pad;
  }
}

std::string axes(const Frame& f, const PlotSpec& spec, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  s += "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" + num(f.right - f.left) + "\" height=\"" +
       num(f.bottom - f.top) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = f.x0 + (f.x1 - f.x0) * k / 4.0, y = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += "<line x1=\"" + num(f.px(x)) + "\" y1=\"" + num(f.bottom) + "\" x2=\"" + num(f.px(x)) + "\" y2=\"" +
         num(f.bottom + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(f.bottom + 20) + "\" text-anchor=\"middle\">" + label(x) +
         "</text>\n";
    s += "<line x1=\"" + num(f.left - 5) + "\" y1=\"" + num(f.py(y)) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
         num(f.py(y)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(f.left - 8) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" + label(y) +
         "</text>\n";
  }
  s += "<text x=\"" + num((f.left + f.right) / 2) + "\" y=\"" + num(f.bottom + 42) + "\" text-anchor=\"middle\">" +
       escape(xlabel) + "</text>\n";
  s += "<text x=\"20\" y=\"" + num((f.top + f.bottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
       num((f.top + f.bottom) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  if (!spec.title.empty())
    s += "<text x=\"" + num(spec.width / 2.0) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" +
         escape(spec.title) + "</text>\n";
  return s;
}

std::string header(const PlotSpec& spec) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::vector<double> distinct(const std::vector<double>& v) {
  std::set<double> s;
  for (double x : v)
    if (std::isfinite(x)) s.insert(x);
  return {s.begin(), s.end()};
}

std::string heatmap(const Dataset& data, const PlotSpec& spec) {
  const auto xs = data.numeric(spec.x), ys = data.numeric(spec.y), cs = data.numeric(spec.color);
  const auto ux = distinct(xs), uy = distinct(ys);
  if (ux.empty() || uy.empty()) throw InvalidArgument("no finite coordinates to plot");
  const bool phase_space = spec.kind == PlotKind::phase_space;
  const bool cyclic = !phase_space && spec.cyclic.value_or(looks_like_phase(spec.color));

  double lo = INFINITY, hi = -INFINITY;
  for (double c : cs)
    if (std::isfinite(c)) lo = std::min(lo, c), hi = std::max(hi, c);
  if (cyclic) {
    lo = -std::numbers::pi;
    hi = std::numbers::pi;
  } else if (phase_space && std::isfinite(lo)) {
    hi = std::max(std::abs(lo), std::abs(hi));
    lo = -hi;
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  widen(lo, hi);
  auto colour = [&](double c) -> std::string {
    if (!std::isfinite(c)) return "#c8c8c8";
    if (cyclic) return hex(cyclic_map(c));
    return hex(lerp_map(phase_space ? kDiverging : kSequential, (c - lo) / (hi - lo)));
  };

  // Cells are centred on their coordinates; edges sit halfway between neighbours.
  auto edges = [](const std::vector<double>& u) {
    std::vector<double> e(u.size() + 1);
    for (size_t k = 1; k < u.size(); ++k) e[k] = 0.5 * (u[k - 1] + u[k]);
    const double h0 = u.size() > 1 ? u[1] - u[0] : 1.0, h1 = u.size() > 1 ? u.back() - u[u.size() - 2] : 1.0;
    e.front() = u.front() - 0.5 * h0;
    e.back() = u.back() + 0.5 * h1;
    return e;
  };
  const auto ex = edges(ux), ey = edges(uy);
  Frame f;
  f.right = spec.width - 130.0;
  f.bottom = spec.height - 60.0;
  f.x0 = ex.front();
  f.x1 = ex.back();
  f.y0 = ey.front();
  f.y1 = ey.back();

  std::string svg = header(spec);
  for (size_t r = 0; r < data.rows.size(); ++r) {
    if (!std::isfinite(xs[r]) || !std::isfinite(ys[r])) continue;
    const size_t i = static_cast<size_t>(std::lower_bound(ux.begin(), ux.end(), xs[r]) - ux.begin());
    const size_t j = static_cast<size_t>(std::lower_bound(uy.begin(), uy.end(), ys[r]) - uy.begin());
    const double x = f.px(ex[i]), y = f.py(ey[j + 1]);
    svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(f.px(ex[i + 1]) - x) + "\" height=\"" +
           num(f.py(ey[j]) - y) + "\" fill=\"" + colour(cs[r]) + "\" shape-rendering=\"crispEdges\"/>\n";
  }
  svg += axes(f, spec, spec.x, spec.y);

  // Colour bar.
  const double bx = f.right + 25, bw = 20;
  const int steps = 64;
  for (int k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) / steps;
    const double y = f.bottom - (t0 + 1.0 / steps) * (f.bottom - f.top);
    svg += "<rect x=\"" + num(bx) + "\" y=\"" + num(y) + "\" width=\"" + num(bw) + "\" height=\"" +
           num((f.bottom - f.top) / steps + 0.5) + "\" fill=\"" + colour(lo + (t0 + 0.5 / steps) * (hi - lo)) +
           "\"/>\n";
  }
  svg += "<rect x=\"" + num(bx) + "\" y=\"" + num(f.top) + "\" width=\"" + num(bw) + "\" height=\"" +
         num(f.bottom - f.top) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg += "<text x=\"" + num(bx + bw + 5) + "\" y=\"" + num(f.bottom - k / 4.0 * (f.bottom - f.top) + 4) + "\">" +
           label(v) + "</text>\n";
  }
  svg += "<text x=\"" + num(bx + bw / 2) + "\" y=\"" + num(f.top - 10) + "\" text-anchor=\"middle\">" +
         escape(spec.color) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string lines(const Dataset& data, const PlotSpec& spec) {
  const auto xs = data.numeric(spec.x), ys = data.numeric(spec.y);
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  const std::optional<size_t> gcol =
      spec.group.empty() ? std::nullopt : std::optional<size_t>(data.column_index(spec.group));
  std::vector<std::string> order;
  for (size_t r = 0; r < data.rows.size(); ++r) {
    const std::string key = gcol ? data.rows[r][*gcol] : "";
    if (!curves.count(key)) order.push_back(key);
    curves[key].emplace_back(xs[r], ys[r]);
  }
  // Numeric group labels sort numerically.
  std::stable_sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
    try {
      return parse_number(a) < parse_number(b);
    } catch (const Error&) {
      return a < b;
    }
  });

  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (size_t r = 0; r < xs.size(); ++r) {
    if (!std::isfinite(xs[r]) || !std::isfinite(ys[r])) continue;
    xlo = std::min(xlo, xs[r]), xhi = std::max(xhi, xs[r]);
    ylo = std::min(ylo, ys[r]), yhi = std::max(yhi, ys[r]);
  }
  if (!std::isfinite(xlo)) throw InvalidArgument("no finite points to plot");
  widen(xlo, xhi);
  widen(ylo, yhi);
  const double pad = 0.05 * (yhi - ylo);
  Frame f;
  f.right = spec.width - (gcol ? 140.0 : 30.0);
  f.bottom = spec.height - 60.0;
  f.x0 = xlo;
  f.x1 = xhi;
  f.y0 = ylo - pad;
  f.y1 = yhi + pad;

  std::string svg = header(spec);
  svg += axes(f, spec, spec.x, spec.y);
  for (size_t g = 0; g < order.size(); ++g) {
    auto pts = curves[order[g]];
    std::stable_sort(pts.begin(), pts.end());
    const std::string& col = kPalette[g % kPalette.size()];
    // A NaN breaks the curve.
    std::string path;
    bool pen = false;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + num(f.px(x)) + " " + num(f.py(y));
      pen = true;
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.5\"/>\n";
    if (gcol) {
      const double ly = f.top + 10 + 18.0 * static_cast<double>(g);
      svg += "<line x1=\"" + num(f.right + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(f.right + 32) + "\" y2=\"" +
             num(ly) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
      svg += "<text x=\"" + num(f.right + 37) + "\" y=\"" + num(ly + 4) + "\">" + escape(spec.group) + " = " +
             escape(order[g]) + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "heatmap") return PlotKind::heatmap;
  if (name == "lines") return PlotKind::lines;
  if (name == "phase_space" || name == "phase-space") return PlotKind::phase_space;
  throw InvalidArgument("unknown plot kind '" + name + "' (heatmap, lines, phase-space)");
}

std::string render_svg(const Dataset& data, const PlotSpec& spec) {
  if (data.empty()) throw InvalidArgument("empty dataset: nothing to plot");
  if (spec.x.empty() || spec.y.empty()) throw InvalidArgument("plot needs x and y columns");
  for (const auto& c : {spec.x, spec.y}) data.column_index(c);
  if (spec.kind == PlotKind::lines) return lines(data, spec);
  if (spec.color.empty()) throw InvalidArgument("heatmap needs a colour column");
  data.column_index(spec.color);
  return heatmap(data, spec);
}

void render_plot(const Dataset& data, const PlotSpec& spec, const std::filesystem::path& out) {
  const std::string svg = render_svg(data, spec);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write " + out.string());
  f << svg;
}

}  // namespace qvdp
