#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmon/imaging.hpp"

namespace tmon {

enum class ErrorKind {
  NoRender,
  AlphaBlending,
  ColorError,
  PixelNoise,
  Clipping,
  PartialRendering,
  Stride,
  Scale,
  FloodForeground,
  FloodBackground,
};

inline constexpr std::array<ErrorKind, 10> kAllErrorKinds = {
    ErrorKind::NoRender,   ErrorKind::AlphaBlending,    ErrorKind::ColorError,
    ErrorKind::PixelNoise, ErrorKind::Clipping,         ErrorKind::PartialRendering,
    ErrorKind::Stride,     ErrorKind::Scale,            ErrorKind::FloodForeground,
    ErrorKind::FloodBackground};

/// The eight kinds that make up the test/eval buckets besides the good one.
inline constexpr std::array<ErrorKind, 8> kBucketErrorKinds = {
    ErrorKind::NoRender,   ErrorKind::AlphaBlending, ErrorKind::ColorError,
    ErrorKind::PixelNoise, ErrorKind::Clipping,      ErrorKind::PartialRendering,
    ErrorKind::Stride,     ErrorKind::Scale};

std::string_view to_string(ErrorKind kind) noexcept;
/// Throws ValidationError for unknown names.
ErrorKind parse_error_kind(std::string_view name);
/// NoRender and the flood kinds look the same at every level.
bool is_leveled(ErrorKind kind) noexcept;

inline constexpr int kMaxErrorLevel = 10;

struct ErrorSpec {
  ErrorKind kind = ErrorKind::NoRender;
  int level = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const ErrorSpec&, const ErrorSpec&) = default;
};

/// Renders `asset` over `bg` at `offset` with the fault described by `spec`.
/// `region` bounds the area for PixelNoise and FloodBackground; it defaults
/// to the icon's footprint. Deterministic in (inputs, spec).
Image inject(const Image& bg, const TelltaleAsset& asset, Point offset, const ErrorSpec& spec,
             std::optional<Roi> region = std::nullopt);

/// Levels 0..10 of one kind, all drawn from the same seed so that random
/// corruptions at level L are a subset of those at level L+1.
std::vector<Image> severity_sweep(const Image& bg, const TelltaleAsset& asset, Point offset,
                                  ErrorKind kind, std::uint64_t seed,
                                  std::optional<Roi> region = std::nullopt);

/// Hue rotation in HSV space, angle in degrees.
Rgb rotate_hue(Rgb c, double degrees) noexcept;

}  // namespace tmon
