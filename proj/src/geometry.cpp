#include <algorithm>
#include <cmath>
#include <string>

#include "blend.hpp"
#include "tmon/error.hpp"
#include "tmon/imaging.hpp"

namespace tmon {

namespace {

constexpr double kMinDeterminant = 1e-9;

struct Sample {
  double c[4];
};

// Bilinear sample at index-space coordinate (u, v), integer values hitting
// pixel centres. Clamped mode extends edge pixels; otherwise outside samples
// are transparent. Colour is interpolated premultiplied.
Sample sample_bilinear(const Image& img, double u, double v, bool clamp_edges) {
  const int w = img.width();
  const int h = img.height();
  if (clamp_edges) {
    u = std::clamp(u, 0.0, static_cast<double>(w - 1));
    v = std::clamp(v, 0.0, static_cast<double>(h - 1));
  }
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const int x0 = static_cast<int>(fu);
  const int y0 = static_cast<int>(fv);
  const double ax = u - fu;
  const double ay = v - fv;
  Sample acc{{0.0, 0.0, 0.0, 0.0}};
  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double wgt = wx[i] * wy[j];
      if (wgt == 0.0) continue;
      int x = xs[i];
      int y = ys[j];
      if (clamp_edges) {
        x = std::min(x, w - 1);
        y = std::min(y, h - 1);
      } else if (!img.contains(x, y)) {
        continue;
      }
      const std::uint8_t* p = img.px(x, y);
      const double a = p[3] / 255.0;
      acc.c[0] += wgt * a * p[0];
      acc.c[1] += wgt * a * p[1];
      acc.c[2] += wgt * a * p[2];
      acc.c[3] += wgt * p[3];
    }
  }
  return acc;
}

Rgba unpremultiply(const Sample& s) {
  const double a = s.c[3] / 255.0;
  if (a <= 0.0) return {0, 0, 0, 0};
  auto to_byte = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  };
  return {to_byte(s.c[0] / a), to_byte(s.c[1] / a), to_byte(s.c[2] / a), to_byte(s.c[3])};
}

struct WarpedPatch {
  Image image;
  Point origin;  // top-left of the patch relative to the placement offset
};

// Renders an icon through a forward transform onto a patch covering the
// transformed footprint; pixels outside the source become transparent.
WarpedPatch warp_icon(const Image& icon, const GeomTransform& t) {
  const GeomTransform inv = t.inverse();
  const double w = icon.width();
  const double h = icon.height();
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const auto& [cx, cy] : {std::pair{0.0, 0.0}, {w, 0.0}, {0.0, h}, {w, h}}) {
    const auto p = t.apply(cx, cy);
    min_x = std::min(min_x, p[0]);
    max_x = std::max(max_x, p[0]);
    min_y = std::min(min_y, p[1]);
    max_y = std::max(max_y, p[1]);
  }
  constexpr double kEps = 1e-9;
  const int x0 = static_cast<int>(std::floor(min_x + kEps));
  const int y0 = static_cast<int>(std::floor(min_y + kEps));
  const int x1 = static_cast<int>(std::ceil(max_x - kEps));
  const int y1 = static_cast<int>(std::ceil(max_y - kEps));
  Image patch(std::max(1, x1 - x0), std::max(1, y1 - y0), Rgba{0, 0, 0, 0});
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      const auto src = inv.apply(x0 + x + 0.5, y0 + y + 0.5);
      patch.set(x, y, unpremultiply(sample_bilinear(icon, src[0] - 0.5, src[1] - 0.5, false)));
    }
  }
  return {std::move(patch), {x0, y0}};
}

Image compose_impl(const Image& bg, std::span<const Placement> placements, bool clip) {
  Image out = bg;
  for (const Placement& p : placements) {
    if (p.asset == nullptr) throw ValidationError("placement without asset");
    if (!p.transform) {
      detail::blend_into(out, p.asset->icon(), p.global_alpha, p.offset, clip);
    } else {
      const WarpedPatch patch = warp_icon(p.asset->icon(), *p.transform);
      detail::blend_into(out, patch.image, p.global_alpha,
                         {p.offset.x + patch.origin.x, p.offset.y + patch.origin.y}, clip);
    }
  }
  auto bytes = out.bytes();
  for (std::size_t i = 3; i < bytes.size(); i += 4) bytes[i] = 255;
  return out;
}

}  // namespace

GeomTransform::GeomTransform(Kind kind, std::array<double, 6> matrix) : kind_(kind), m_(matrix) {
  for (double v : m_) {
    if (!std::isfinite(v)) throw InvalidTransformError("transform has non-finite entries");
  }
  if (std::abs(determinant()) <= kMinDeterminant) {
    throw InvalidTransformError("transform is singular (|det| <= 1e-9)");
  }
}

GeomTransform GeomTransform::identity() { return {Kind::AffineWarp, {1, 0, 0, 0, 1, 0}}; }

GeomTransform GeomTransform::scale(double sx, double sy, double cx, double cy) {
  return {Kind::Scale, {sx, 0.0, cx - sx * cx, 0.0, sy, cy - sy * cy}};
}

GeomTransform GeomTransform::affine(std::array<double, 6> matrix) {
  return {Kind::AffineWarp, matrix};
}

GeomTransform GeomTransform::inverse() const {
  const double det = determinant();
  if (std::abs(det) <= kMinDeterminant) throw InvalidTransformError("transform is singular");
  const double a = m_[4] / det;
  const double b = -m_[1] / det;
  const double d = -m_[3] / det;
  const double e = m_[0] / det;
  return {kind_, {a, b, -(a * m_[2] + b * m_[5]), d, e, -(d * m_[2] + e * m_[5])}};
}

Image compose(const Image& bg, std::span<const Placement> placements) {
  return compose_impl(bg, placements, false);
}

Image compose_clipped(const Image& bg, std::span<const Placement> placements) {
  return compose_impl(bg, placements, true);
}

Image warp(const Image& image, const GeomTransform& t) {
  const GeomTransform inv = t.inverse();
  Image out(image.width(), image.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const auto src = inv.apply(x + 0.5, y + 0.5);
      out.set(x, y, unpremultiply(sample_bilinear(image, src[0] - 0.5, src[1] - 0.5, true)));
    }
  }
  return out;
}

Image denormalize(const Image& image, const GeomTransform& t) { return warp(image, t.inverse()); }

CropLayout centered_layout(const TelltaleAsset& asset, int crop_size) {
  if (crop_size < asset.width() || crop_size < asset.height()) {
    throw BoundsError("crop of " + std::to_string(crop_size) + " px cannot hold telltale '" +
                      asset.id() + "'");
  }
  return {crop_size, crop_size,
          {(crop_size - asset.width()) / 2, (crop_size - asset.height()) / 2}};
}

ShapeMask shape_mask(const TelltaleAsset& asset, const CropLayout& layout, int height, int width,
                     MaskMode mode, double bg_weight) {
  if (height < 1 || width < 1) throw ShapeError("mask dimensions must be >= 1x1");
  if (layout.crop_width < 1 || layout.crop_height < 1) throw ShapeError("empty crop layout");
  if (mode == MaskMode::Weighted && !(bg_weight >= 0.0 && bg_weight <= 1.0)) {
    throw ValidationError("background weight must lie in [0, 1]");
  }
  // Alpha of the icon laid out on the crop canvas, then brought to a canvas
  // that is an exact multiple of the mask grid.
  Image canvas(layout.crop_width, layout.crop_height, Rgba{0, 0, 0, 0});
  const Image& icon = asset.icon();
  for (int y = 0; y < icon.height(); ++y) {
    for (int x = 0; x < icon.width(); ++x) {
      const int cx = x + layout.icon_offset.x;
      const int cy = y + layout.icon_offset.y;
      if (canvas.contains(cx, cy)) canvas.set(cx, cy, {0, 0, 0, icon.at(x, y).a});
    }
  }
  std::vector<double> weights(static_cast<std::size_t>(height) * width, 0.0);
  for (int my = 0; my < height; ++my) {
    const int y_begin = my * canvas.height() / height;
    const int y_end = std::max(y_begin + 1, (my + 1) * canvas.height() / height);
    for (int mx = 0; mx < width; ++mx) {
      const int x_begin = mx * canvas.width() / width;
      const int x_end = std::max(x_begin + 1, (mx + 1) * canvas.width() / width);
      int pooled = 0;
      for (int y = y_begin; y < std::min(y_end, canvas.height()); ++y) {
        for (int x = x_begin; x < std::min(x_end, canvas.width()); ++x) {
          pooled = std::max<int>(pooled, canvas.px(x, y)[3]);
        }
      }
      const bool fg = pooled / 255.0 > 0.5;
      weights[static_cast<std::size_t>(my) * width + mx] =
          fg ? 1.0 : (mode == MaskMode::Weighted ? bg_weight : 0.0);
    }
  }
  bool any_fg = false;
  for (int i = 0; i < height * width && !any_fg; ++i) any_fg = weights[i] == 1.0;
  if (!any_fg) {
    throw DegenerateMaskError("telltale '" + asset.id() + "' covers no mask cell");
  }
  return ShapeMask(height, width, std::move(weights));
}

ShapeMask shape_mask(const TelltaleAsset& asset, int height, int width, MaskMode mode,
                     double bg_weight) {
  return shape_mask(asset, CropLayout{asset.width(), asset.height(), {0, 0}}, height, width, mode,
                    bg_weight);
}

}  // namespace tmon
