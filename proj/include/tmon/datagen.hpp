#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmon/faults.hpp"
#include "tmon/imaging.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

enum class Split { Train, Test, Eval };

std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view s);

struct ManifestRow {
  /// Relative to the dataset root: `<split>/<telltale>/<index>.png`.
  std::string image_path;
  std::string telltale_id;
  /// Top-left of the crop window inside the background.
  Point offset;
  int background_id = 0;
  std::optional<ErrorSpec> error;
  Expected expected = Expected::On;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct DatasetManifest {
  Split split = Split::Train;
  std::vector<ManifestRow> rows;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Image> images;  // crops, aligned with manifest.rows
};

/// Crop geometry shared by every split: the icon sits centered in a square
/// crop of `crop_size` pixels.
struct DatasetGeometry {
  int crop_size = 52;
};

/// Renders one manifest row from scratch.
Image render_row(const ManifestRow& row, const TelltaleAsset& asset,
                 std::span<const Image> backgrounds, const DatasetGeometry& geometry);

/// n clean crops at seeded-random positions over random backgrounds.
Dataset gen_train(const TelltaleAsset& asset, std::span<const Image> backgrounds, int n,
                  std::uint64_t seed, const DatasetGeometry& geometry = {});

/// per_bucket good crops plus per_bucket crops for each of the eight bucket
/// error kinds, levels uniform in 1..10 (9 buckets).
Dataset gen_test(const TelltaleAsset& asset, std::span<const Image> backgrounds, int per_bucket,
                 std::uint64_t seed, const DatasetGeometry& geometry = {});

/// Same bucket layout as gen_test, tagged eval. `flood_per_kind` extra rows
/// are appended for each flood kind.
Dataset gen_eval(const TelltaleAsset& asset, std::span<const Image> backgrounds, int per_defect,
                 std::uint64_t seed, const DatasetGeometry& geometry = {},
                 int flood_per_kind = 0);

/// CSV header: image_path,telltale_id,offset_x,offset_y,background_id,
/// error_kind,error_level,error_seed,expected_state
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes images under `root` and the manifest to
/// `root/<split>/<telltale>/manifest.csv`.
void write_dataset(const std::filesystem::path& root, const Dataset& dataset);
/// Loads a manifest and its images. Throws DataError when a row's image is
/// missing.
Dataset load_dataset(const std::filesystem::path& root, Split split,
                     const std::string& telltale_id);
std::filesystem::path manifest_path(const std::filesystem::path& root, Split split,
                                    const std::string& telltale_id);

/// Bucket label of a row: "good" or the error kind name.
std::string bucket_of(const ManifestRow& row);

}  // namespace tmon
