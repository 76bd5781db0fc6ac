#pragma once

#include <filesystem>
#include <vector>

#include "tmon/imaging.hpp"

namespace tmon {

/// Reads any PNG and converts it to 8-bit RGBA.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Loads every `<id>.png` in a directory as a telltale asset, sorted by id.
std::vector<TelltaleAsset> load_assets(const std::filesystem::path& dir);
void save_assets(const std::filesystem::path& dir, const std::vector<TelltaleAsset>& assets);

}  // namespace tmon
