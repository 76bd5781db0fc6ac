#include <gtest/gtest.h>

#include <filesystem>

#include "tmon/assets.hpp"
#include "tmon/error.hpp"
#include "tmon/imaging.hpp"
#include "tmon/png_io.hpp"
#include "tmon/rng.hpp"

using namespace tmon;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (auto& b : img.bytes()) b = rng.byte();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.px(x, y)[3] = 255;
  return img;
}

TelltaleAsset square_asset(int side, Rgba c = {255, 0, 0, 255}) {
  return TelltaleAsset("sq", Image(side, side, c));
}

}  // namespace

TEST(AlphaBlend, OpaqueForegroundReplacesBackground) {
  const Image bg(8, 8, Rgba{10, 20, 30, 255});
  const Image fg(3, 3, Rgba{200, 100, 50, 255});
  const Image out = alpha_blend(fg, bg, 1.0, {2, 4});
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const bool inside = x >= 2 && x < 5 && y >= 4 && y < 7;
      EXPECT_EQ(out.at(x, y), inside ? Rgba(200, 100, 50, 255) : Rgba(10, 20, 30, 255));
    }
  }
}

TEST(AlphaBlend, ZeroGlobalAlphaKeepsBackground) {
  const Image bg = random_image(9, 7, 1);
  const Image fg = random_image(4, 4, 2);
  const Image out = alpha_blend(fg, bg, 0.0, {1, 1});
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x) {
      const Rgba a = out.at(x, y);
      const Rgba b = bg.at(x, y);
      EXPECT_EQ(Rgb(a.r, a.g, a.b), Rgb(b.r, b.g, b.b));
    }
}

TEST(AlphaBlend, HalfAlphaRedOverGreen) {
  const Image bg(1, 1, Rgba{0, 255, 0, 255});
  const Image fg(1, 1, Rgba{255, 0, 0, 255});
  EXPECT_EQ(alpha_blend(fg, bg, 0.5, {0, 0}).at(0, 0), Rgba(128, 127, 0, 255));
}

TEST(AlphaBlend, OutOfBoundsPlacementThrows) {
  const Image bg(4, 4);
  const Image fg(3, 3);
  EXPECT_THROW((void)alpha_blend(fg, bg, 1.0, {2, 0}), BoundsError);
  EXPECT_THROW((void)alpha_blend(fg, bg, 1.0, {-1, 0}), BoundsError);
}

TEST(Compose, EmptyListAndSinglePlacement) {
  const Image bg = random_image(16, 16, 3);
  const Image same = compose(bg, {});
  EXPECT_TRUE(std::ranges::equal(same.bytes(), bg.bytes()));
  const auto asset = builtin_assets(8).front();
  const Placement p{&asset, {3, 5}, 1.0, std::nullopt};
  const Image one = compose(bg, std::span(&p, 1));
  const Image ref = alpha_blend(asset.icon(), bg, 1.0, {3, 5});
  EXPECT_TRUE(std::ranges::equal(one.bytes(), ref.bytes()));
}

TEST(Compose, OverlapBlendsSequentially) {
  const Image bg = random_image(20, 20, 4);
  const auto assets = builtin_assets(10);
  const std::vector<Placement> ps = {{&assets[0], {2, 2}, 0.7, std::nullopt},
                                     {&assets[1], {6, 5}, 0.6, std::nullopt}};
  const Image out = compose(bg, ps);
  const Image ref =
      alpha_blend(assets[1].icon(), alpha_blend(assets[0].icon(), bg, 0.7, {2, 2}), 0.6, {6, 5});
  EXPECT_TRUE(std::ranges::equal(out.bytes(), ref.bytes()));
}

TEST(Crop, MatchesDoubleLoopCopy) {
  const Image frame = random_image(80, 70, 5);
  EXPECT_TRUE(std::ranges::equal(crop(frame, {0, 0, 80, 70}).bytes(), frame.bytes()));
  EXPECT_EQ(crop(frame, {13, 17, 1, 1}).at(0, 0), frame.at(13, 17));
  const Image c = crop(frame, {11, 9, 52, 52});
  for (int y = 0; y < 52; ++y)
    for (int x = 0; x < 52; ++x) ASSERT_EQ(c.at(x, y), frame.at(11 + x, 9 + y));
  EXPECT_THROW((void)crop(frame, {40, 40, 52, 52}), BoundsError);
}

TEST(CropCompose, CommuteWhenPlacementInsideRoi) {
  const Image bg = random_image(64, 64, 6);
  const auto asset = builtin_assets(12).front();
  const Roi roi{10, 10, 30, 30};
  const Placement full{&asset, {20, 15}, 0.8, std::nullopt};
  const Placement local{&asset, {10, 5}, 0.8, std::nullopt};
  const Image a = crop(compose(bg, std::span(&full, 1)), roi);
  const Image b = compose(crop(bg, roi), std::span(&local, 1));
  EXPECT_TRUE(std::ranges::equal(a.bytes(), b.bytes()));
}

TEST(ShapeMask, OpaqueSquareIsAllOnes) {
  const auto m = shape_mask(square_asset(32), 16, 16);
  for (double w : m.weights()) EXPECT_EQ(w, 1.0);
}

TEST(ShapeMask, RingMatchesBruteForcePooling) {
  Image icon(64, 64, Rgba{0, 0, 0, 0});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double r = std::hypot(x + 0.5 - 32.0, y + 0.5 - 32.0);
      if (r > 20 && r < 26) icon.set(x, y, {255, 255, 255, 255});
    }
  const TelltaleAsset ring("ring", icon);
  const auto mask = shape_mask(ring, 16, 16);
  const auto weighted = shape_mask(ring, 16, 16, MaskMode::Weighted, 0.25);
  for (int my = 0; my < 16; ++my)
    for (int mx = 0; mx < 16; ++mx) {
      int best = 0;
      for (int y = 4 * my; y < 4 * my + 4; ++y)
        for (int x = 4 * mx; x < 4 * mx + 4; ++x) best = std::max<int>(best, icon.at(x, y).a);
      const bool fg = best > 127;
      EXPECT_EQ(mask.at(my, mx), fg ? 1.0 : 0.0);
      EXPECT_EQ(weighted.at(my, mx), fg ? 1.0 : 0.25);
    }
  EXPECT_EQ(shape_mask(ring, 16, 16), mask);
}

TEST(ShapeMask, EmptyMaskIsDegenerate) {
  EXPECT_THROW(ShapeMask(2, 2, {0.0, 0.0, 0.0, 0.0}), DegenerateMaskError);
  Image icon(8, 8, Rgba{0, 0, 0, 0});
  icon.set(0, 0, {1, 1, 1, 40});
  EXPECT_THROW(TelltaleAsset("faint", icon), ValidationError);
}

TEST(TelltaleAsset, RejectsIconWithoutOpaquePixel) {
  EXPECT_THROW(TelltaleAsset("none", Image(4, 4, Rgba{0, 0, 0, 0})), ValidationError);
}

TEST(TelltaleAsset, DominantColorIsMostFrequent) {
  Image icon(4, 4, Rgba{0, 0, 0, 0});
  for (int x = 0; x < 4; ++x) icon.set(x, 0, {9, 9, 9, 255});
  icon.set(0, 1, {1, 2, 3, 255});
  EXPECT_EQ(TelltaleAsset("d", icon).dominant_color(), Rgb(9, 9, 9));
}

TEST(Denormalize, IdentityIsExact) {
  const Image img = random_image(20, 20, 7);
  const Image out = denormalize(img, GeomTransform::identity());
  EXPECT_TRUE(std::ranges::equal(out.bytes(), img.bytes()));
}

TEST(Denormalize, ScaleRoundTripWithinResamplingTolerance) {
  // Smooth content so bilinear artifacts stay small.
  Image img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(4 * x), static_cast<std::uint8_t>(4 * y), 128, 255});
  const auto t = GeomTransform::scale(2.0, 2.0, 32.0, 32.0);
  const Image back = denormalize(warp(img, t), t);
  for (int y = 24; y < 40; ++y)
    for (int x = 24; x < 40; ++x) {
      const Rgba a = back.at(x, y);
      const Rgba b = img.at(x, y);
      EXPECT_LE(std::abs(a.r - b.r), 16);
      EXPECT_LE(std::abs(a.g - b.g), 16);
      EXPECT_LE(std::abs(a.b - b.b), 16);
    }
}

TEST(Denormalize, SingularTransformThrows) {
  EXPECT_THROW(GeomTransform::affine({1, 2, 0, 2, 4, 0}), InvalidTransformError);
}

TEST(Resize, ConstantImageStaysConstant) {
  const Image img(52, 52, Rgba{17, 99, 201, 255});
  const Image r = resize_bilinear(img, 128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) ASSERT_EQ(r.at(x, y), Rgba(17, 99, 201, 255));
}

TEST(Png, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "tmon_png_test";
  std::filesystem::create_directories(dir);
  const Image img = random_image(13, 7, 8);
  write_png(dir / "a.png", img);
  const Image back = read_png(dir / "a.png");
  EXPECT_TRUE(std::ranges::equal(back.bytes(), img.bytes()));
  std::filesystem::remove_all(dir);
}
