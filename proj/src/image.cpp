#include <algorithm>
#include <map>
#include <string>

#include "blend.hpp"
#include "tmon/error.hpp"
#include "tmon/imaging.hpp"

namespace tmon {

Image::Image(int width, int height, Rgba fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ShapeError("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  pixels_.resize(pixel_count() * 4);
  for (std::size_t i = 0; i < pixels_.size(); i += 4) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
    pixels_[i + 3] = fill.a;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> rgba)
    : width_(width), height_(height), pixels_(std::move(rgba)) {
  if (width < 1 || height < 1) throw ShapeError("image dimensions must be >= 1");
  if (pixels_.size() != pixel_count() * 4) {
    throw ShapeError("pixel buffer holds " + std::to_string(pixels_.size()) +
                     " bytes, expected " + std::to_string(pixel_count() * 4));
  }
}

TelltaleAsset::TelltaleAsset(std::string id, Image icon)
    : id_(std::move(id)), icon_(std::move(icon)) {
  std::map<std::uint32_t, std::size_t> counts;
  for (int y = 0; y < icon_.height(); ++y) {
    for (int x = 0; x < icon_.width(); ++x) {
      const Rgba c = icon_.at(x, y);
      if (c.a == 0) continue;
      shape_.push_back({x, y});
      if (c.a >= 128) ++counts[(std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | c.b];
    }
  }
  if (counts.empty()) throw ValidationError("telltale '" + id_ + "' has no opaque pixel");
  // std::map iterates in ascending key order, so the first maximum wins ties.
  std::uint32_t best = 0;
  std::size_t best_count = 0;
  for (const auto& [key, n] : counts) {
    if (n > best_count) {
      best = key;
      best_count = n;
    }
  }
  dominant_ = {static_cast<std::uint8_t>(best >> 16), static_cast<std::uint8_t>(best >> 8),
               static_cast<std::uint8_t>(best)};
}

ShapeMask::ShapeMask(int height, int width, std::vector<double> weights)
    : height_(height), width_(width), weights_(std::move(weights)) {
  if (height < 1 || width < 1) throw ShapeError("mask dimensions must be >= 1");
  if (weights_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ShapeError("mask weight count does not match dimensions");
  }
  bool any = false;
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("mask weights must lie in [0, 1]");
    any = any || w > 0.0;
  }
  if (!any) throw DegenerateMaskError("mask has no cell with positive weight");
}

double ShapeMask::total_weight() const noexcept {
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum;
}

std::size_t ShapeMask::active_cells() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; }));
}

namespace detail {

// Blends fg into dst in place. When clip is false the placement must fit.
void blend_into(Image& dst, const Image& fg, double global_alpha, Point offset, bool clip) {
  if (!(global_alpha >= 0.0 && global_alpha <= 1.0)) {
    throw ValidationError("global alpha must lie in [0, 1]");
  }
  const bool fits = offset.x >= 0 && offset.y >= 0 && offset.x + fg.width() <= dst.width() &&
                    offset.y + fg.height() <= dst.height();
  if (!fits && !clip) {
    throw BoundsError("placement " + std::to_string(fg.width()) + "x" +
                      std::to_string(fg.height()) + " at (" + std::to_string(offset.x) + "," +
                      std::to_string(offset.y) + ") exceeds " + std::to_string(dst.width()) +
                      "x" + std::to_string(dst.height()));
  }
  const int x0 = std::max(0, -offset.x);
  const int y0 = std::max(0, -offset.y);
  const int x1 = std::min(fg.width(), dst.width() - offset.x);
  const int y1 = std::min(fg.height(), dst.height() - offset.y);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::uint8_t* s = fg.px(x, y);
      std::uint8_t* d = dst.px(x + offset.x, y + offset.y);
      const double a = (s[3] / 255.0) * global_alpha;
      if (a > 0.0) {
        for (int c = 0; c < 3; ++c) {
          const double delta = a * (static_cast<double>(s[c]) - static_cast<double>(d[c]));
          const double v = static_cast<double>(d[c]) + round_half_away(delta);
          d[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
      }
      d[3] = 255;
    }
  }
}

}  // namespace detail

Image alpha_blend(const Image& fg, const Image& bg, double global_alpha, Point offset) {
  Image out = bg;
  detail::blend_into(out, fg, global_alpha, offset, false);
  auto bytes = out.bytes();
  for (std::size_t i = 3; i < bytes.size(); i += 4) bytes[i] = 255;
  return out;
}

Image crop(const Image& frame, const Roi& roi) {
  if (!roi.inside(frame.width(), frame.height())) {
    throw BoundsError("roi (" + std::to_string(roi.x) + "," + std::to_string(roi.y) + "," +
                      std::to_string(roi.w) + "," + std::to_string(roi.h) +
                      ") outside frame");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(roi.w) * roi.h * 4);
  const auto row_bytes = static_cast<std::size_t>(roi.w) * 4;
  for (int y = 0; y < roi.h; ++y) {
    std::copy_n(frame.px(roi.x, roi.y + y), row_bytes, out.data() + y * row_bytes);
  }
  return Image(roi.w, roi.h, std::move(out));
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width < 1 || height < 1) throw ShapeError("resize target must be >= 1x1");
  if (width == image.width() && height == image.height()) return image;
  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  // Pixel-centre sampling, clamped to the edge.
  auto taps = [](int out_size, int in_size, std::size_t stride) {
    std::vector<Tap> t(static_cast<std::size_t>(out_size));
    const double s = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
      const double v = std::clamp((o + 0.5) * s - 0.5, 0.0, static_cast<double>(in_size - 1));
      const int i0 = static_cast<int>(v);
      const int i1 = std::min(i0 + 1, in_size - 1);
      t[static_cast<std::size_t>(o)] = {static_cast<std::size_t>(i0) * stride,
                                        static_cast<std::size_t>(i1) * stride, v - i0};
    }
    return t;
  };
  const auto xs = taps(width, image.width(), 4);
  const auto ys = taps(height, image.height(), static_cast<std::size_t>(image.width()) * 4);
  Image out(width, height);
  const std::uint8_t* src = image.bytes().data();
  std::uint8_t* dst = out.bytes().data();
  for (const Tap& ty : ys) {
    for (const Tap& tx : xs) {
      const std::uint8_t* p00 = src + ty.i0 + tx.i0;
      const std::uint8_t* p01 = src + ty.i0 + tx.i1;
      const std::uint8_t* p10 = src + ty.i1 + tx.i0;
      const std::uint8_t* p11 = src + ty.i1 + tx.i1;
      for (int c = 0; c < 4; ++c) {
        const double top = p00[c] + tx.f * (p01[c] - p00[c]);
        const double bot = p10[c] + tx.f * (p11[c] - p10[c]);
        // Convex combination of bytes: already in [0, 255], so +0.5 rounds half away.
        *dst++ = static_cast<std::uint8_t>(top + ty.f * (bot - top) + 0.5);
      }
    }
  }
  return out;
}

}  // namespace tmon
