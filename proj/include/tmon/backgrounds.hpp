#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "tmon/imaging.hpp"
#include "tmon/rng.hpp"

namespace tmon {

enum class BackgroundKind { Solid, Gradient, Noise, Map, Stripes };

std::string_view to_string(BackgroundKind kind) noexcept;

/// One procedural texture of the given kind.
Image make_background(BackgroundKind kind, int width, int height, Rng rng);

/// `count` procedural backgrounds cycling through every kind, followed by
/// any PNGs found in `user_dir` (sorted by name). Index = background id.
std::vector<Image> background_pool(int count, int width, int height, std::uint64_t seed,
                                   const std::optional<std::filesystem::path>& user_dir = {});

}  // namespace tmon
