#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "tmon/assets.hpp"
#include "tmon/backgrounds.hpp"
#include "tmon/datagen.hpp"
#include "tmon/error.hpp"

using namespace tmon;

namespace {

struct Pool {
  std::vector<TelltaleAsset> assets = builtin_assets();
  std::vector<Image> bgs = background_pool(4, 100, 100, 9);
};

const Pool& pool() {
  static const Pool p;
  return p;
}

}  // namespace

TEST(Datagen, TestSplitHasNineEqualBuckets) {
  const auto ds = gen_test(pool().assets[0], pool().bgs, 4, 5);
  ASSERT_EQ(ds.images.size(), 36u);
  ASSERT_EQ(ds.manifest.rows.size(), 36u);
  std::map<std::string, int> counts;
  for (const auto& r : ds.manifest.rows) {
    ++counts[bucket_of(r)];
    if (r.error && is_leveled(r.error->kind)) {
      EXPECT_GE(r.error->level, 1);
      EXPECT_LE(r.error->level, 10);
    }
  }
  EXPECT_EQ(counts.size(), 9u);
  for (const auto& [k, n] : counts) EXPECT_EQ(n, 4) << k;
  for (const auto& img : ds.images) {
    EXPECT_EQ(img.width(), 52);
    EXPECT_EQ(img.height(), 52);
  }
}

TEST(Datagen, TrainIsClean) {
  const auto ds = gen_train(pool().assets[1], pool().bgs, 10, 3);
  ASSERT_EQ(ds.images.size(), 10u);
  for (const auto& r : ds.manifest.rows) {
    EXPECT_FALSE(r.error.has_value());
    EXPECT_EQ(r.expected, Expected::On);
  }
}

TEST(Datagen, EvalAppendsFloodRows) {
  const auto ds = gen_eval(pool().assets[0], pool().bgs, 2, 3, {}, 3);
  EXPECT_EQ(ds.images.size(), 18u + 6u);
  int fg = 0, bg = 0;
  for (const auto& r : ds.manifest.rows) {
    if (r.error && r.error->kind == ErrorKind::FloodForeground) ++fg;
    if (r.error && r.error->kind == ErrorKind::FloodBackground) ++bg;
  }
  EXPECT_EQ(fg, 3);
  EXPECT_EQ(bg, 3);
}

TEST(Datagen, ReproducibleAndRenderable) {
  const auto a = gen_test(pool().assets[2], pool().bgs, 2, 77);
  const auto b = gen_test(pool().assets[2], pool().bgs, 2, 77);
  ASSERT_EQ(a.manifest.rows, b.manifest.rows);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    EXPECT_EQ(a.images[i], b.images[i]);
    EXPECT_EQ(render_row(a.manifest.rows[i], pool().assets[2], pool().bgs, {}), a.images[i]);
  }
  const auto c = gen_test(pool().assets[2], pool().bgs, 2, 78);
  EXPECT_NE(a.manifest.rows, c.manifest.rows);
}

TEST(Datagen, TestAndEvalDiffer) {
  const auto t = gen_test(pool().assets[0], pool().bgs, 3, 12);
  const auto e = gen_eval(pool().assets[0], pool().bgs, 3, 13);
  std::set<std::tuple<int, int, int, std::uint64_t>> keys;
  for (const auto& r : t.manifest.rows)
    keys.insert({r.offset.x, r.offset.y, r.background_id, r.error ? r.error->seed : 0});
  int shared = 0;
  for (const auto& r : e.manifest.rows)
    shared += keys.count({r.offset.x, r.offset.y, r.background_id, r.error ? r.error->seed : 0});
  EXPECT_EQ(shared, 0);
  EXPECT_EQ(e.manifest.split, Split::Eval);
}

TEST(Datagen, DiskRoundTripAndMissingImage) {
  const auto root = std::filesystem::temp_directory_path() / "tmon_datagen_test";
  std::filesystem::remove_all(root);
  const auto ds = gen_test(pool().assets[0], pool().bgs, 1, 4);
  write_dataset(root, ds);
  const auto back = load_dataset(root, Split::Test, pool().assets[0].id());
  EXPECT_EQ(back.manifest.rows, ds.manifest.rows);
  ASSERT_EQ(back.images.size(), ds.images.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) EXPECT_EQ(back.images[i], ds.images[i]);

  std::filesystem::remove(root / ds.manifest.rows[3].image_path);
  EXPECT_THROW((void)load_dataset(root, Split::Test, pool().assets[0].id()), DataError);
  std::filesystem::remove_all(root);
}

TEST(Datagen, SplitNames) {
  for (auto s : {Split::Train, Split::Test, Split::Eval}) EXPECT_EQ(parse_split(to_string(s)), s);
  EXPECT_THROW((void)parse_split("dev"), ValidationError);
}
