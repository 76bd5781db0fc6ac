#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tmon {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Row-major RGBA raster, 8 bits per channel, straight alpha.
class Image {
 public:
  Image(int width, int height, Rgba fill = {0, 0, 0, 255});
  Image(int width, int height, std::vector<std::uint8_t> rgba);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
  [[nodiscard]] std::span<std::uint8_t> bytes() noexcept { return pixels_; }

  [[nodiscard]] const std::uint8_t* px(int x, int y) const noexcept {
    return pixels_.data() + offset(x, y);
  }
  [[nodiscard]] std::uint8_t* px(int x, int y) noexcept { return pixels_.data() + offset(x, y); }

  [[nodiscard]] Rgba at(int x, int y) const noexcept {
    const auto* p = px(x, y);
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba c) noexcept {
    auto* p = px(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }
  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  [[nodiscard]] std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 4;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Region of interest in frame coordinates.
struct Roi {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  friend bool operator==(const Roi&, const Roi&) = default;

  [[nodiscard]] bool inside(int frame_w, int frame_h) const noexcept {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= frame_w && y + h <= frame_h;
  }
  [[nodiscard]] bool contains(int px, int py) const noexcept {
    return px >= x && py >= y && px < x + w && py < y + h;
  }
};

/// A telltale icon. The alpha channel defines its shape.
class TelltaleAsset {
 public:
  TelltaleAsset(std::string id, Image icon);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const Image& icon() const noexcept { return icon_; }
  [[nodiscard]] int width() const noexcept { return icon_.width(); }
  [[nodiscard]] int height() const noexcept { return icon_.height(); }
  /// Most frequent RGB among opaque icon pixels (ties: smallest packed value).
  [[nodiscard]] Rgb dominant_color() const noexcept { return dominant_; }
  /// A pixel belongs to the shape when its alpha is non-zero.
  [[nodiscard]] bool in_shape(int x, int y) const noexcept { return icon_.at(x, y).a > 0; }
  /// Icon-local coordinates of all shape pixels, row-major order.
  [[nodiscard]] const std::vector<Point>& shape_pixels() const noexcept { return shape_; }

 private:
  std::string id_;
  Image icon_;
  Rgb dominant_;
  std::vector<Point> shape_;
};

enum class MaskMode { Binary, Weighted };

/// Per-cell weights at feature-map resolution.
class ShapeMask {
 public:
  ShapeMask(int height, int width, std::vector<double> weights);

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] double at(int y, int x) const noexcept {
    return weights_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                    static_cast<std::size_t>(x)];
  }
  [[nodiscard]] double total_weight() const noexcept;
  [[nodiscard]] std::size_t active_cells() const noexcept;

  friend bool operator==(const ShapeMask&, const ShapeMask&) = default;

 private:
  int height_;
  int width_;
  std::vector<double> weights_;
};

/// 2x3 affine map from source (icon / original) coordinates to display
/// coordinates, in the pixel-centre convention (pixel (i,j) spans
/// [i, i+1) x [j, j+1)).
class GeomTransform {
 public:
  enum class Kind { Scale, AffineWarp };

  GeomTransform(Kind kind, std::array<double, 6> matrix);

  static GeomTransform identity();
  /// Scaling by (sx, sy) about the point (cx, cy).
  static GeomTransform scale(double sx, double sy, double cx, double cy);
  static GeomTransform affine(std::array<double, 6> matrix);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::array<double, 6>& matrix() const noexcept { return m_; }
  [[nodiscard]] double determinant() const noexcept { return m_[0] * m_[4] - m_[1] * m_[3]; }
  [[nodiscard]] std::array<double, 2> apply(double x, double y) const noexcept {
    return {m_[0] * x + m_[1] * y + m_[2], m_[3] * x + m_[4] * y + m_[5]};
  }
  /// Throws InvalidTransformError when the 2x2 part is singular.
  [[nodiscard]] GeomTransform inverse() const;

 private:
  Kind kind_;
  std::array<double, 6> m_;
};

struct Placement {
  const TelltaleAsset* asset = nullptr;
  Point offset;
  double global_alpha = 1.0;
  std::optional<GeomTransform> transform;
};

/// Source-over blend of `fg` onto `bg` with fg's top-left at `offset`.
/// out = bg + round_half_away(a * (fg - bg)), a = fg_alpha / 255 * global_alpha.
/// Output alpha is 255 everywhere.
Image alpha_blend(const Image& fg, const Image& bg, double global_alpha, Point offset);

/// Blends the placements in order. A transform is applied to the icon with
/// bilinear resampling before blending; its output is anchored at `offset`
/// in icon-local coordinates, so the transformed footprint may extend left
/// of or above the offset.
Image compose(const Image& bg, std::span<const Placement> placements);

/// Same as compose but silently clips the footprint to the frame.
Image compose_clipped(const Image& bg, std::span<const Placement> placements);

Image crop(const Image& frame, const Roi& roi);

/// Bilinear resize (pixel-centre convention, edge-clamped).
Image resize_bilinear(const Image& image, int width, int height);

/// Resamples `image` through `t`: out(p) = image(t^-1(p)), bilinear, with
/// out-of-range samples taken from the nearest edge pixel. Output has the
/// input's size.
Image warp(const Image& image, const GeomTransform& t);

/// Undoes a display transform: out(p) = image(t(p)).
Image denormalize(const Image& image, const GeomTransform& t);

/// Where the icon sits inside a crop window.
struct CropLayout {
  int crop_width = 0;
  int crop_height = 0;
  Point icon_offset;
};

/// Layout that places the icon centered in a square crop of side `crop_size`.
CropLayout centered_layout(const TelltaleAsset& asset, int crop_size);

/// Shape mask at feature resolution. The icon alpha is laid out on a crop
/// canvas, split into height x width blocks, and each block max-pooled.
/// Binary: 1 where pooled alpha > 0.5 else 0; weighted: else bg_weight.
/// Throws DegenerateMaskError if no cell is foreground.
ShapeMask shape_mask(const TelltaleAsset& asset, const CropLayout& layout, int height, int width,
                     MaskMode mode = MaskMode::Binary, double bg_weight = 0.0);

/// Icon filling the whole crop.
ShapeMask shape_mask(const TelltaleAsset& asset, int height, int width,
                     MaskMode mode = MaskMode::Binary, double bg_weight = 0.0);

/// Rounds half away from zero.
inline double round_half_away(double v) noexcept { return std::round(v); }

}  // namespace tmon
