#include "tmon/assets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace tmon {

namespace {

// Signed distance helpers in icon units where the icon spans [0, 1]^2.
using Sdf = std::function<double(double, double)>;

Sdf circle(double cx, double cy, double r) {
  return [=](double x, double y) { return std::hypot(x - cx, y - cy) - r; };
}

Sdf box(double cx, double cy, double hw, double hh) {
  return [=](double x, double y) {
    const double dx = std::abs(x - cx) - hw;
    const double dy = std::abs(y - cy) - hh;
    return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0)) + std::min(std::max(dx, dy), 0.0);
  };
}

Sdf segment(double ax, double ay, double bx, double by, double r) {
  return [=](double x, double y) {
    const double px = x - ax, py = y - ay, dx = bx - ax, dy = by - ay;
    const double t = std::clamp((px * dx + py * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    return std::hypot(px - t * dx, py - t * dy) - r;
  };
}

// Upward triangle with apex (cx, top) and base at y = bottom.
Sdf triangle(double cx, double top, double bottom, double half_base) {
  return [=](double x, double y) {
    const double h = bottom - top;
    const double len = std::hypot(h, half_base);
    const double left = (-h * (x - cx) - half_base * (y - top)) / len;
    const double right = (h * (x - cx) - half_base * (y - top)) / len;
    return std::max({left, right, y - bottom});
  };
}

Sdf unite(Sdf a, Sdf b) {
  return [=](double x, double y) { return std::min(a(x, y), b(x, y)); };
}
Sdf subtract(Sdf a, Sdf b) {
  return [=](double x, double y) { return std::max(a(x, y), -b(x, y)); };
}

struct IconSpec {
  std::string id;
  Rgb fill;
  Sdf body;
  Sdf symbol;  // drawn black on top of the fill
};

Image rasterize(const IconSpec& spec, int size) {
  Image img(size, size, Rgba{0, 0, 0, 0});
  const double outline = std::max(2.0, size / 16.0) / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      const double d = spec.body(u, v);
      if (d >= 0.0) continue;
      const bool edge = d > -outline;
      const bool mark = spec.symbol(u, v) < 0.0;
      if (edge || mark) {
        img.set(x, y, {0, 0, 0, 255});
      } else {
        img.set(x, y, {spec.fill.r, spec.fill.g, spec.fill.b, 255});
      }
    }
  }
  return img;
}

std::vector<IconSpec> icon_specs() {
  std::vector<IconSpec> specs;
  const Sdf exclamation = unite(segment(0.5, 0.36, 0.5, 0.62, 0.045), circle(0.5, 0.76, 0.05));
  specs.push_back({"warning", {225, 30, 30}, triangle(0.5, 0.04, 0.94, 0.5), exclamation});
  specs.push_back({"engine",
                   {255, 170, 0},
                   unite(unite(box(0.5, 0.56, 0.34, 0.24), box(0.5, 0.24, 0.16, 0.08)),
                         unite(box(0.09, 0.56, 0.07, 0.12), box(0.91, 0.52, 0.07, 0.18))),
                   unite(box(0.5, 0.56, 0.18, 0.04), box(0.5, 0.36, 0.04, 0.06))});
  specs.push_back({"brake",
                   {230, 20, 40},
                   circle(0.5, 0.5, 0.47),
                   unite(subtract(circle(0.5, 0.5, 0.32), circle(0.5, 0.5, 0.26)),
                         unite(segment(0.5, 0.36, 0.5, 0.56, 0.04), circle(0.5, 0.65, 0.045)))});
  specs.push_back({"abs",
                   {250, 190, 20},
                   circle(0.5, 0.5, 0.47),
                   unite(unite(segment(0.3, 0.34, 0.3, 0.66, 0.04), segment(0.5, 0.34, 0.5, 0.66, 0.04)),
                         unite(segment(0.7, 0.34, 0.7, 0.66, 0.04), segment(0.3, 0.5, 0.7, 0.5, 0.03)))});
  specs.push_back({"autopilot",
                   {40, 200, 70},
                   circle(0.5, 0.5, 0.47),
                   unite(subtract(circle(0.5, 0.5, 0.33), circle(0.5, 0.5, 0.26)),
                         unite(circle(0.5, 0.5, 0.08),
                               unite(segment(0.5, 0.5, 0.24, 0.5, 0.035),
                                     unite(segment(0.5, 0.5, 0.76, 0.5, 0.035),
                                           segment(0.5, 0.5, 0.5, 0.78, 0.035)))))});
  specs.push_back({"seatbelt",
                   {235, 40, 25},
                   unite(circle(0.5, 0.2, 0.17), box(0.5, 0.68, 0.3, 0.28)),
                   unite(segment(0.28, 0.45, 0.72, 0.9, 0.045), circle(0.62, 0.74, 0.06))});
  return specs;
}

}  // namespace

std::vector<TelltaleAsset> builtin_assets(int size) {
  std::vector<TelltaleAsset> assets;
  for (const auto& spec : icon_specs()) assets.emplace_back(spec.id, rasterize(spec, size));
  return assets;
}

}  // namespace tmon
