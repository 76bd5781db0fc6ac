#include "tmon/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>

#include "tmon/error.hpp"

namespace tmon {

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&img, path.c_str()) == 0) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr) == 0) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), std::move(buf));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGBA;
  if (png_image_write_to_file(&img, path.c_str(), 0, image.bytes().data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

std::vector<TelltaleAsset> load_assets(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no asset directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TelltaleAsset> assets;
  assets.reserve(files.size());
  for (const auto& f : files) assets.emplace_back(f.stem().string(), read_png(f));
  return assets;
}

void save_assets(const std::filesystem::path& dir, const std::vector<TelltaleAsset>& assets) {
  std::filesystem::create_directories(dir);
  for (const auto& a : assets) write_png(dir / (a.id() + ".png"), a.icon());
}

}  // namespace tmon
