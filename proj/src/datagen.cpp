#include "tmon/datagen.hpp"

#include <fstream>
#include <sstream>

#include "tmon/error.hpp"
#include "tmon/png_io.hpp"
#include "tmon/rng.hpp"

namespace tmon {

namespace {

constexpr const char* kManifestHeader =
    "image_path,telltale_id,offset_x,offset_y,background_id,error_kind,error_level,error_seed,"
    "expected_state";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_backgrounds(std::span<const Image> backgrounds, int crop) {
  if (backgrounds.empty()) throw ValidationError("no backgrounds given");
  for (const Image& bg : backgrounds) {
    if (bg.width() < crop || bg.height() < crop) {
      throw BoundsError("background " + std::to_string(bg.width()) + "x" +
                        std::to_string(bg.height()) + " is smaller than the " +
                        std::to_string(crop) + " px crop");
    }
  }
}

std::string row_path(Split split, const std::string& telltale, std::size_t index) {
  return std::string(to_string(split)) + "/" + telltale + "/" + std::to_string(index) + ".png";
}

ManifestRow place(Split split, const TelltaleAsset& asset, std::span<const Image> backgrounds,
                  int crop, std::size_t index, Rng rng) {
  ManifestRow row;
  row.image_path = row_path(split, asset.id(), index);
  row.telltale_id = asset.id();
  row.background_id = static_cast<int>(rng.uniform_index(backgrounds.size()));
  const Image& bg = backgrounds[static_cast<std::size_t>(row.background_id)];
  row.offset.x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(bg.width() - crop + 1)));
  row.offset.y = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(bg.height() - crop + 1)));
  return row;
}

Dataset bucketed(Split split, const TelltaleAsset& asset, std::span<const Image> backgrounds,
                 int per_bucket, std::uint64_t seed, const DatasetGeometry& geometry,
                 int flood_per_kind) {
  if (per_bucket < 1) throw ValidationError("per-bucket count must be >= 1");
  if (flood_per_kind < 0) throw ValidationError("flood count must be >= 0");
  check_backgrounds(backgrounds, geometry.crop_size);
  (void)centered_layout(asset, geometry.crop_size);
  const Rng rng(seed);
  Dataset ds;
  ds.manifest.split = split;
  auto add = [&](std::optional<ErrorKind> kind) {
    const std::size_t index = ds.manifest.rows.size();
    Rng row_rng = rng.split(index);
    ManifestRow row = place(split, asset, backgrounds, geometry.crop_size, index, row_rng);
    if (kind) {
      const int level = static_cast<int>(row_rng.uniform_int(1, kMaxErrorLevel));
      row.error = ErrorSpec{*kind, is_leveled(*kind) ? level : 0, row_rng.next_u64()};
    }
    ds.images.push_back(render_row(row, asset, backgrounds, geometry));
    ds.manifest.rows.push_back(std::move(row));
  };
  for (int i = 0; i < per_bucket; ++i) add(std::nullopt);
  for (ErrorKind kind : kBucketErrorKinds) {
    for (int i = 0; i < per_bucket; ++i) add(kind);
  }
  for (ErrorKind kind : {ErrorKind::FloodForeground, ErrorKind::FloodBackground}) {
    for (int i = 0; i < flood_per_kind; ++i) add(kind);
  }
  return ds;
}

}  // namespace

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Eval: return "eval";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "eval") return Split::Eval;
  throw ValidationError("split must be train, test or eval, got '" + std::string(s) + "'");
}

Image render_row(const ManifestRow& row, const TelltaleAsset& asset,
                 std::span<const Image> backgrounds, const DatasetGeometry& geometry) {
  if (row.background_id < 0 || static_cast<std::size_t>(row.background_id) >= backgrounds.size()) {
    throw DataError("manifest row references unknown background " +
                    std::to_string(row.background_id));
  }
  const Image& bg = backgrounds[static_cast<std::size_t>(row.background_id)];
  const CropLayout layout = centered_layout(asset, geometry.crop_size);
  const Roi roi{row.offset.x, row.offset.y, layout.crop_width, layout.crop_height};
  if (!roi.inside(bg.width(), bg.height())) throw BoundsError("crop window outside background");
  const Point icon_at{row.offset.x + layout.icon_offset.x, row.offset.y + layout.icon_offset.y};
  if (!row.error) {
    const Placement p{&asset, icon_at, 1.0, std::nullopt};
    return crop(compose(bg, std::span(&p, 1)), roi);
  }
  return crop(inject(bg, asset, icon_at, *row.error, roi), roi);
}

Dataset gen_train(const TelltaleAsset& asset, std::span<const Image> backgrounds, int n,
                  std::uint64_t seed, const DatasetGeometry& geometry) {
  if (n < 1) throw ValidationError("training set size must be >= 1");
  check_backgrounds(backgrounds, geometry.crop_size);
  const Rng rng(seed);
  Dataset ds;
  ds.manifest.split = Split::Train;
  for (int i = 0; i < n; ++i) {
    const auto index = static_cast<std::size_t>(i);
    ManifestRow row =
        place(Split::Train, asset, backgrounds, geometry.crop_size, index, rng.split(index));
    ds.images.push_back(render_row(row, asset, backgrounds, geometry));
    ds.manifest.rows.push_back(std::move(row));
  }
  return ds;
}

Dataset gen_test(const TelltaleAsset& asset, std::span<const Image> backgrounds, int per_bucket,
                 std::uint64_t seed, const DatasetGeometry& geometry) {
  return bucketed(Split::Test, asset, backgrounds, per_bucket, seed, geometry, 0);
}

Dataset gen_eval(const TelltaleAsset& asset, std::span<const Image> backgrounds, int per_defect,
                 std::uint64_t seed, const DatasetGeometry& geometry, int flood_per_kind) {
  return bucketed(Split::Eval, asset, backgrounds, per_defect, seed, geometry, flood_per_kind);
}

std::string bucket_of(const ManifestRow& row) {
  return row.error ? std::string(to_string(row.error->kind)) : "good";
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.rows) {
    out << r.image_path << ',' << r.telltale_id << ',' << r.offset.x << ',' << r.offset.y << ','
        << r.background_id << ',' << (r.error ? to_string(r.error->kind) : "none") << ','
        << (r.error ? r.error->level : 0) << ',' << (r.error ? r.error->seed : 0) << ','
        << to_string(r.expected) << '\n';
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw DataError("manifest " + path.string() + " has an unexpected header");
  }
  DatasetManifest m;
  bool split_known = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 9 fields");
    }
    try {
      ManifestRow r;
      r.image_path = f[0];
      r.telltale_id = f[1];
      r.offset = {std::stoi(f[2]), std::stoi(f[3])};
      r.background_id = std::stoi(f[4]);
      if (f[5] != "none") r.error = ErrorSpec{parse_error_kind(f[5]), std::stoi(f[6]), std::stoull(f[7])};
      r.expected = parse_expected(f[8]);
      const auto slash = r.image_path.find('/');
      const Split s = parse_split(r.image_path.substr(0, slash));
      if (split_known && s != m.split) throw DataError("manifest mixes splits");
      m.split = s;
      split_known = true;
      m.rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& root, Split split,
                                    const std::string& telltale_id) {
  return root / std::string(to_string(split)) / telltale_id / "manifest.csv";
}

void write_dataset(const std::filesystem::path& root, const Dataset& dataset) {
  if (dataset.images.size() != dataset.manifest.rows.size()) {
    throw DataError("dataset image count does not match its manifest");
  }
  if (dataset.manifest.rows.empty()) return;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    write_png(root / dataset.manifest.rows[i].image_path, dataset.images[i]);
  }
  write_manifest(manifest_path(root, dataset.manifest.split, dataset.manifest.rows[0].telltale_id),
                 dataset.manifest);
}

Dataset load_dataset(const std::filesystem::path& root, Split split,
                     const std::string& telltale_id) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path(root, split, telltale_id));
  for (const auto& row : ds.manifest.rows) {
    const auto p = root / row.image_path;
    if (!std::filesystem::exists(p)) throw DataError("missing dataset image " + p.string());
    ds.images.push_back(read_png(p));
  }
  return ds;
}

}  // namespace tmon
