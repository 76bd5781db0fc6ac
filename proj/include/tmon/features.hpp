#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tmon/imaging.hpp"

namespace tmon {

/// Per-channel input normalization: (v / 255 - mean) / std.
struct Normalization {
  std::array<float, 4> mean{0.5f, 0.5f, 0.5f, 0.5f};
  std::array<float, 4> stddev{0.25f, 0.25f, 0.25f, 0.25f};
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Fixed convolution stage: conv -> per-filter affine -> ReLU -> max-pools.
struct FilterBank {
  std::uint32_t filters = 64;
  std::uint32_t in_channels = 3;
  std::uint32_t kernel_h = 7;
  std::uint32_t kernel_w = 7;
  std::uint32_t conv_stride = 2;
  std::uint32_t padding = 3;
  /// Number of 3x3 stride-2 (pad 1) max-pool stages after the convolution.
  std::uint32_t pool_stages = 2;
  /// filters x in_channels x kernel_h x kernel_w, row-major kernels.
  std::vector<float> weights;
  std::vector<float> scale;
  std::vector<float> bias;

  [[nodiscard]] std::size_t kernel_size() const noexcept {
    return std::size_t{in_channels} * kernel_h * kernel_w;
  }
  [[nodiscard]] std::span<const float> filter(std::size_t k) const noexcept {
    return std::span(weights).subspan(k * kernel_size(), kernel_size());
  }
  /// conv_stride * 2^pool_stages.
  [[nodiscard]] int reduction() const noexcept {
    return static_cast<int>(conv_stride) << pool_stages;
  }
  /// Feature-map side produced for a square input of `input_side` pixels.
  [[nodiscard]] int output_side(int input_side) const noexcept;
  /// Throws ValidationError on inconsistent sizes or non-finite values.
  void validate() const;
  [[nodiscard]] std::uint64_t hash() const noexcept;

  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

/// C x H x W activation block, channel-major.
class FeatureTensor {
 public:
  FeatureTensor(int channels, int height, int width, std::uint64_t provenance = 0);
  FeatureTensor(int channels, int height, int width, std::vector<float> data,
                std::uint64_t provenance = 0);

  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::uint64_t provenance() const noexcept { return provenance_; }

  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }
  [[nodiscard]] std::span<const float> channel(int c) const noexcept {
    return std::span(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
  }
  [[nodiscard]] std::span<float> channel(int c) noexcept {
    return std::span(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
  }
  [[nodiscard]] float at(int c, int y, int x) const noexcept {
    return data_[static_cast<std::size_t>(c) * plane_size() +
                 static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)];
  }
  float& at(int c, int y, int x) noexcept {
    return data_[static_cast<std::size_t>(c) * plane_size() +
                 static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)];
  }
  [[nodiscard]] bool same_shape(const FeatureTensor& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

 private:
  int channels_;
  int height_;
  int width_;
  std::vector<float> data_;
  std::uint64_t provenance_;
};

FilterBank load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const FilterBank& bank);
/// In-memory variants of the weights format.
FilterBank parse_weights(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_weights(const FilterBank& bank);

/// Deterministic 64-filter 7x7 bank: 32 oriented edge/bar filters
/// (4 orientations x {edge, bar} x {luminance, red-green} x 2 scales)
/// followed by 32 seeded Gaussian-random filters. Every filter is zero-mean
/// with unit L2 norm; bias = 0. Every output is scaled by kBuiltinScale so
/// that a squared per-cell residual of 1 marks a strong local deviation
/// (the default FRE clamp d_max = 1 is expressed in these units).
FilterBank builtin_bank(std::uint64_t seed = 0);

inline constexpr float kBuiltinScale = 1.0f / 32.0f;

/// Runs the bank on a square RGB(A) image whose side is a multiple of the
/// bank's reduction factor. Throws ShapeError otherwise.
FeatureTensor extract(const Image& image, const FilterBank& bank,
                      const Normalization& norm = {});

/// Features of images that differ from a fixed base input in few pixels.
/// The base responses are cached and only the receptive fields of changed
/// pixels are updated; results agree with extract() up to float summation
/// order. Falls back to a dense pass when many pixels change.
class DeltaExtractor {
 public:
  DeltaExtractor(FilterBank bank, Image base, Normalization norm = {});

  [[nodiscard]] FeatureTensor operator()(const Image& input) const;
  [[nodiscard]] const Image& base() const noexcept { return base_; }

 private:
  FilterBank bank_;
  Normalization norm_;
  Image base_;
  int side_ = 0;
  int out_side_ = 0;
  std::vector<float> base_pre_;  // positions x filters, filters contiguous
  std::vector<float> taps_;      // [c][ky][kx][filter]
};

/// Extractor configuration fingerprint stored with every tensor.
std::uint64_t extractor_hash(const FilterBank& bank, const Normalization& norm) noexcept;

}  // namespace tmon
