#include "tmon/backgrounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tmon/error.hpp"
#include "tmon/png_io.hpp"

namespace tmon {

namespace {

constexpr std::array<BackgroundKind, 5> kKinds = {BackgroundKind::Solid, BackgroundKind::Gradient,
                                                  BackgroundKind::Noise, BackgroundKind::Map,
                                                  BackgroundKind::Stripes};

Rgb random_color(Rng& rng) { return {rng.byte(), rng.byte(), rng.byte()}; }

std::uint8_t lerp(std::uint8_t a, std::uint8_t b, double t) {
  return static_cast<std::uint8_t>(std::clamp(std::round(a + t * (b - a)), 0.0, 255.0));
}

Rgba mix(Rgb a, Rgb b, double t) { return {lerp(a.r, b.r, t), lerp(a.g, b.g, t), lerp(a.b, b.b, t), 255}; }

// Bilinearly interpolated value noise on a coarse lattice.
Image value_noise(int width, int height, Rng& rng) {
  const int cell = 8 + static_cast<int>(rng.uniform_index(24));
  const int gw = width / cell + 2;
  const int gh = height / cell + 2;
  std::vector<Rgb> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& c : lattice) c = random_color(rng);
  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
      const Rgba top = mix(at(x0, y0), at(x0 + 1, y0), tx);
      const Rgba bot = mix(at(x0, y0 + 1), at(x0 + 1, y0 + 1), tx);
      img.set(x, y, mix({top.r, top.g, top.b}, {bot.r, bot.g, bot.b}, ty));
    }
  }
  return img;
}

// Random colour pulled towards `base`; keeps map features low-contrast.
Rgb pastel(Rgb base, Rng& rng) {
  const Rgba c = mix(base, random_color(rng), 0.35);
  return {c.r, c.g, c.b};
}

// Pale land colour crossed by roads and blocks, loosely like a navigation map.
Image map_like(int width, int height, Rng& rng) {
  const Rgb land{static_cast<std::uint8_t>(200 + rng.uniform_index(50)),
                 static_cast<std::uint8_t>(200 + rng.uniform_index(50)),
                 static_cast<std::uint8_t>(180 + rng.uniform_index(60))};
  Image img(width, height, Rgba{land.r, land.g, land.b, 255});
  const int blocks = 6 + static_cast<int>(rng.uniform_index(10));
  for (int b = 0; b < blocks; ++b) {
    const Rgb c = pastel(land, rng);
    const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width)));
    const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height)));
    const int w = 10 + static_cast<int>(rng.uniform_index(60));
    const int h = 10 + static_cast<int>(rng.uniform_index(60));
    for (int y = y0; y < std::min(height, y0 + h); ++y) {
      for (int x = x0; x < std::min(width, x0 + w); ++x) img.set(x, y, {c.r, c.g, c.b, 255});
    }
  }
  const int roads = 3 + static_cast<int>(rng.uniform_index(6));
  for (int r = 0; r < roads; ++r) {
    const Rgb c = rng.bernoulli(0.5) ? Rgb{255, 255, 255} : pastel(Rgb{250, 200, 90}, rng);
    const double angle = rng.uniform() * 3.14159265358979;
    const double nx = std::cos(angle), ny = std::sin(angle);
    const double offset = (rng.uniform() - 0.5) * (width + height) * 0.5;
    const double half = 1.5 + rng.uniform() * 4.0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double d = (x - width / 2.0) * nx + (y - height / 2.0) * ny - offset;
        if (std::abs(d) < half) img.set(x, y, {c.r, c.g, c.b, 255});
      }
    }
  }
  return img;
}

}  // namespace

std::string_view to_string(BackgroundKind kind) noexcept {
  switch (kind) {
    case BackgroundKind::Solid: return "solid";
    case BackgroundKind::Gradient: return "gradient";
    case BackgroundKind::Noise: return "noise";
    case BackgroundKind::Map: return "map";
    case BackgroundKind::Stripes: return "stripes";
  }
  return "solid";
}

Image make_background(BackgroundKind kind, int width, int height, Rng rng) {
  switch (kind) {
    case BackgroundKind::Solid: {
      const Rgb c = random_color(rng);
      return Image(width, height, Rgba{c.r, c.g, c.b, 255});
    }
    case BackgroundKind::Gradient: {
      const Rgb a = random_color(rng);
      const Rgb b = random_color(rng);
      const double angle = rng.uniform() * 6.28318530717959;
      const double nx = std::cos(angle), ny = std::sin(angle);
      const double span = std::abs(nx) * width + std::abs(ny) * height;
      Image img(width, height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double t = ((x - width / 2.0) * nx + (y - height / 2.0) * ny) / span + 0.5;
          img.set(x, y, mix(a, b, std::clamp(t, 0.0, 1.0)));
        }
      }
      return img;
    }
    case BackgroundKind::Noise:
      return value_noise(width, height, rng);
    case BackgroundKind::Map:
      return map_like(width, height, rng);
    case BackgroundKind::Stripes: {
      const Rgb a = random_color(rng);
      const Rgb b = random_color(rng);
      const int period = 6 + static_cast<int>(rng.uniform_index(40));
      const bool vertical = rng.bernoulli(0.5);
      Image img(width, height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int k = (vertical ? x : y) / period;
          const Rgb c = k % 2 == 0 ? a : b;
          img.set(x, y, {c.r, c.g, c.b, 255});
        }
      }
      return img;
    }
  }
  throw ValidationError("unknown background kind");
}

std::vector<Image> background_pool(int count, int width, int height, std::uint64_t seed,
                                   const std::optional<std::filesystem::path>& user_dir) {
  std::vector<Image> pool;
  const Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    pool.push_back(make_background(kKinds[static_cast<std::size_t>(i) % kKinds.size()], width,
                                   height, rng.split(static_cast<std::uint64_t>(i))));
  }
  if (user_dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(*user_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) pool.push_back(read_png(f));
  }
  if (pool.empty()) throw ValidationError("background pool is empty");
  return pool;
}

}  // namespace tmon
