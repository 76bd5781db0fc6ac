#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "../oracles.hpp"
#include "tmon/error.hpp"
#include "tmon/features.hpp"
#include "tmon/rng.hpp"

using namespace tmon;

namespace {

Image random_image(int side, std::uint64_t seed) {
  Rng rng(seed);
  Image img(side, side);
  for (auto& b : img.bytes()) b = rng.byte();
  return img;
}

FilterBank small_bank(std::uint32_t pools) {
  FilterBank b = builtin_bank(3);
  b.filters = 5;
  b.weights.resize(5 * b.kernel_size());
  b.scale = {1.0f, 0.5f, 2.0f, 1.0f, 1.5f};
  b.bias = {0.0f, 0.1f, -0.2f, 0.3f, 0.0f};
  b.pool_stages = pools;
  return b;
}

}  // namespace

TEST(BuiltinBank, DeterministicZeroMeanUnitNorm) {
  const FilterBank a = builtin_bank(9);
  EXPECT_EQ(a, builtin_bank(9));
  EXPECT_EQ(a.filters, 64u);
  for (std::size_t k = 0; k < a.filters; ++k) {
    double sum = 0.0;
    double sq = 0.0;
    for (float w : a.filter(k)) {
      sum += w;
      sq += static_cast<double>(w) * w;
    }
    EXPECT_NEAR(sum, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
  }
}

TEST(Extract, DefaultShapeIs64x16x16) {
  const auto f = extract(random_image(128, 1), builtin_bank());
  EXPECT_EQ(f.channels(), 64);
  EXPECT_EQ(f.height(), 16);
  EXPECT_EQ(f.width(), 16);
}

TEST(Extract, ShapeLaw) {
  const FilterBank b = builtin_bank();
  for (int side : {64, 128, 256}) {
    EXPECT_EQ(b.output_side(side), side / 8);
  }
  EXPECT_THROW((void)extract(random_image(60, 2), b), ShapeError);
}

TEST(Extract, DeltaKernelOnGrayImage) {
  FilterBank b;
  b.filters = 1;
  b.pool_stages = 0;
  b.weights.assign(b.kernel_size(), 0.0f);
  b.weights[3 * 7 + 3] = 1.0f;  // centre of the first input channel
  b.scale = {1.0f};
  b.bias = {0.0f};
  const Image gray(16, 16, Rgba{200, 200, 200, 255});
  const auto f = extract(gray, b);
  const float expected = std::max(0.0f, (200.0f / 255.0f - 0.5f) / 0.25f);
  for (float v : f.data()) EXPECT_NEAR(v, expected, 1e-6);
}

TEST(Extract, MatchesDirectConvolution) {
  for (std::uint32_t pools : {0u, 1u}) {
    const FilterBank b = small_bank(pools);
    const Image img = random_image(16, 10 + pools);
    const auto got = extract(img, b);
    const auto ref = oracle::conv_features(img, b);
    ASSERT_TRUE(got.same_shape(ref));
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_NEAR(got.data()[i], ref.data()[i], 1e-5) << i;
    }
  }
}

TEST(Extract, NonNegative) {
  const auto f = extract(random_image(64, 4), builtin_bank());
  for (float v : f.data()) EXPECT_GE(v, 0.0f);
}

TEST(DeltaExtractor, AgreesWithDenseExtract) {
  const FilterBank b = builtin_bank();
  const Image base = random_image(64, 5);
  const DeltaExtractor dx(b, base);
  Rng rng(6);
  for (int changes : {0, 1, 30, 2000}) {
    Image img = base;
    for (int i = 0; i < changes; ++i) {
      img.set(static_cast<int>(rng.uniform_index(64)), static_cast<int>(rng.uniform_index(64)),
              {rng.byte(), rng.byte(), rng.byte(), 255});
    }
    const auto a = dx(img);
    const auto d = extract(img, b);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.data()[i], d.data()[i], 1e-4);
  }
}

TEST(Weights, RoundTripAndErrors) {
  const FilterBank b = builtin_bank(2);
  const auto bytes = serialize_weights(b);
  EXPECT_EQ(parse_weights(bytes), b);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW((void)parse_weights(bad), FormatError);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2));
  EXPECT_THROW((void)parse_weights(cut), FormatError);
  FilterBank nan = b;
  nan.weights[3] = std::nanf("");
  EXPECT_THROW((void)parse_weights(serialize_weights(nan)), ValidationError);

  const auto path = std::filesystem::temp_directory_path() / "tmon_weights_test.fbnk";
  save_weights(path, b);
  EXPECT_EQ(load_weights(path), b);
  std::filesystem::remove(path);
}
