#include "tmon/faults.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blend.hpp"
#include "tmon/error.hpp"
#include "tmon/rng.hpp"

namespace tmon {

namespace {

constexpr std::array<std::string_view, 10> kNames = {
    "norender", "alpha",  "color", "noise",    "clipping",
    "partial",  "stride", "scale", "flood_fg", "flood_bg"};

Image compose_one(const Image& bg, const TelltaleAsset& asset, Point offset, double alpha = 1.0) {
  const Placement p{&asset, offset, alpha, std::nullopt};
  return compose(bg, std::span(&p, 1));
}

// First `count` entries of a seeded Fisher-Yates permutation of [0, n).
// Prefixes are nested across counts for the same rng seed.
std::vector<std::size_t> pick_distinct(std::size_t n, std::size_t count, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}


Image erase_pixels(const TelltaleAsset& asset, const std::vector<Point>& pixels) {
  Image icon = asset.icon();
  for (const Point& p : pixels) icon.px(p.x, p.y)[3] = 0;
  return icon;
}

}  // namespace

std::string_view to_string(ErrorKind kind) noexcept {
  return kNames[static_cast<std::size_t>(kind)];
}

ErrorKind parse_error_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<ErrorKind>(i);
  }
  throw ValidationError("unknown error kind '" + std::string(name) + "'");
}

bool is_leveled(ErrorKind kind) noexcept {
  return kind != ErrorKind::NoRender && kind != ErrorKind::FloodForeground &&
         kind != ErrorKind::FloodBackground;
}

Rgb rotate_hue(Rgb c, double degrees) noexcept {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  if (delta <= 0.0) return c;
  double h = 0.0;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  h = std::fmod(h + degrees, 360.0);
  if (h < 0.0) h += 360.0;
  const double chroma = delta;
  const double x = chroma * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(h / 60.0) % 6) {
    case 0: r1 = chroma; g1 = x; break;
    case 1: r1 = x; g1 = chroma; break;
    case 2: g1 = chroma; b1 = x; break;
    case 3: g1 = x; b1 = chroma; break;
    case 4: r1 = x; b1 = chroma; break;
    default: r1 = chroma; b1 = x; break;
  }
  auto to_byte = [&](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round((v + mn) * 255.0), 0.0, 255.0));
  };
  return {to_byte(r1), to_byte(g1), to_byte(b1)};
}

Image inject(const Image& bg, const TelltaleAsset& asset, Point offset, const ErrorSpec& spec,
             std::optional<Roi> region) {
  if (spec.level < 0 || spec.level > kMaxErrorLevel) {
    throw ValidationError("error level must lie in [0, 10]");
  }
  const Roi roi = region.value_or(Roi{offset.x, offset.y, asset.width(), asset.height()});
  if (!roi.inside(bg.width(), bg.height())) throw BoundsError("fault region outside frame");
  // Validates the placement for every kind, including those that never draw.
  Image clean = compose_one(bg, asset, offset);
  const int level = spec.level;
  const double t = level / 10.0;
  Rng rng(spec.seed);

  switch (spec.kind) {
    case ErrorKind::NoRender:
      return bg;

    case ErrorKind::AlphaBlending:
      return level == 0 ? clean : compose_one(bg, asset, offset, 1.0 - t);

    case ErrorKind::ColorError: {
      if (level == 0) return clean;
      Image icon = asset.icon();
      const double degrees = 18.0 * level;
      for (int y = 0; y < icon.height(); ++y) {
        for (int x = 0; x < icon.width(); ++x) {
          std::uint8_t* p = icon.px(x, y);
          if (p[3] == 0) continue;
          const Rgb c = rotate_hue({p[0], p[1], p[2]}, degrees);
          p[0] = c.r;
          p[1] = c.g;
          p[2] = c.b;
        }
      }
      return alpha_blend(icon, bg, 1.0, offset);
    }

    case ErrorKind::PixelNoise: {
      const auto n = static_cast<std::size_t>(roi.w) * static_cast<std::size_t>(roi.h);
      for (std::size_t i : pick_distinct(n, fraction_count(t, n), rng.split(1))) {
        const int x = roi.x + static_cast<int>(i % static_cast<std::size_t>(roi.w));
        const int y = roi.y + static_cast<int>(i / static_cast<std::size_t>(roi.w));
        std::uint8_t* p = clean.px(x, y);
        Rng pixel_rng = rng.split(2).split(i);
        Rgb c{pixel_rng.byte(), pixel_rng.byte(), pixel_rng.byte()};
        while (c == Rgb{p[0], p[1], p[2]}) c = {pixel_rng.byte(), pixel_rng.byte(), pixel_rng.byte()};
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
      return clean;
    }

    case ErrorKind::Clipping: {
      if (level == 0) return clean;
      const auto& shape = asset.shape_pixels();
      std::vector<Point> erased;
      for (std::size_t i : pick_distinct(shape.size(), fraction_count(level / 20.0, shape.size()),
                                         rng.split(1))) {
        erased.push_back(shape[i]);
      }
      return alpha_blend(erase_pixels(asset, erased), bg, 1.0, offset);
    }

    case ErrorKind::PartialRendering: {
      if (level == 0) return clean;
      const int removed = static_cast<int>(std::llround(t * asset.height()));
      if (removed >= asset.height()) return bg;
      Image icon = asset.icon();
      for (int y = asset.height() - removed; y < asset.height(); ++y) {
        for (int x = 0; x < asset.width(); ++x) icon.px(x, y)[3] = 0;
      }
      return alpha_blend(icon, bg, 1.0, offset);
    }

    case ErrorKind::Stride: {
      if (level == 0) return clean;
      const int max_shift = (asset.height() - 1) * level / 16;
      Image icon(asset.width() + max_shift, asset.height(), Rgba{0, 0, 0, 0});
      for (int y = 0; y < asset.height(); ++y) {
        const int shift = y * level / 16;
        for (int x = 0; x < asset.width(); ++x) icon.set(x + shift, y, asset.icon().at(x, y));
      }
      // The sheared icon may run past the frame; clip rather than fail.
      Image out = bg;
      detail::blend_into(out, icon, 1.0, offset, true);
      auto bytes = out.bytes();
      for (std::size_t i = 3; i < bytes.size(); i += 4) bytes[i] = 255;
      return out;
    }

    case ErrorKind::Scale: {
      if (level == 0) return clean;
      const double factor = 1.0 + t;
      const Placement p{&asset, offset, 1.0,
                        GeomTransform::scale(factor, factor, asset.width() / 2.0,
                                             asset.height() / 2.0)};
      return compose_clipped(bg, std::span(&p, 1));
    }

    case ErrorKind::FloodForeground: {
      Image out = bg;
      const Rgb d = asset.dominant_color();
      for (const Point& p : asset.shape_pixels()) {
        out.set(p.x + offset.x, p.y + offset.y, {d.r, d.g, d.b, 255});
      }
      auto bytes = out.bytes();
      for (std::size_t i = 3; i < bytes.size(); i += 4) bytes[i] = 255;
      return out;
    }

    case ErrorKind::FloodBackground: {
      const Rgb d = asset.dominant_color();
      for (int y = roi.y; y < roi.y + roi.h; ++y) {
        for (int x = roi.x; x < roi.x + roi.w; ++x) {
          const int ix = x - offset.x;
          const int iy = y - offset.y;
          const bool on_icon = ix >= 0 && iy >= 0 && ix < asset.width() &&
                               iy < asset.height() && asset.in_shape(ix, iy);
          if (!on_icon) clean.set(x, y, {d.r, d.g, d.b, 255});
        }
      }
      return clean;
    }
  }
  throw ValidationError("unhandled error kind");
}

std::vector<Image> severity_sweep(const Image& bg, const TelltaleAsset& asset, Point offset,
                                  ErrorKind kind, std::uint64_t seed, std::optional<Roi> region) {
  std::vector<Image> out;
  out.reserve(kMaxErrorLevel + 1);
  for (int level = 0; level <= kMaxErrorLevel; ++level) {
    out.push_back(inject(bg, asset, offset, {kind, level, seed}, region));
  }
  return out;
}

}  // namespace tmon
