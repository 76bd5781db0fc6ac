#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tmon/error.hpp"
#include "tmon/reports.hpp"

using namespace tmon;

namespace {

ManifestRow row(const std::string& path, std::optional<ErrorSpec> e) {
  ManifestRow r;
  r.image_path = path;
  r.telltale_id = "brake";
  r.error = e;
  return r;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.split = Split::Eval;
  m.rows = {row("a.png", std::nullopt), row("b.png", std::nullopt),
            row("c.png", ErrorSpec{ErrorKind::NoRender, 0, 1}),
            row("d.png", ErrorSpec{ErrorKind::AlphaBlending, 3, 2}),
            row("e.png", ErrorSpec{ErrorKind::AlphaBlending, 3, 3}),
            row("f.png", ErrorSpec{ErrorKind::AlphaBlending, 8, 4})};
  return m;
}

}  // namespace

TEST(Report, BucketsAndFalseAlarms) {
  const auto m = small_manifest();
  const std::vector<double> s{0.2, 1.0, 5.0, 0.5, 1.5, 3.0};
  ThresholdConfig tc;
  tc.tau = 1.0;
  const RunReport r = score_report(m, s, tc);
  EXPECT_EQ(r.good_count, 2u);
  EXPECT_EQ(r.false_alarms, 1u);  // score equal to tau is NOK
  const BucketStats* a3 = r.find("alpha", 3);
  ASSERT_NE(a3, nullptr);
  EXPECT_EQ(a3->count, 2u);
  EXPECT_EQ(a3->nok, 1u);
  EXPECT_DOUBLE_EQ(a3->mean, 1.0);
  EXPECT_DOUBLE_EQ(a3->min, 0.5);
  EXPECT_DOUBLE_EQ(a3->max, 1.5);
  const auto tot = r.kind_total("alpha", 5);
  EXPECT_EQ(tot.count, 1u);
  EXPECT_EQ(tot.nok, 1u);
  EXPECT_EQ(r.sorted_scores.at("good"), (std::vector<double>{0.2, 1.0}));

  EXPECT_THROW((void)score_report(m, std::vector<double>{1.0}, tc), DataError);
}

TEST(Report, PerErrorTypeGrouping) {
  const auto m = small_manifest();
  const std::vector<double> s{0.2, 0.3, 5.0, 0.5, 1.5, 3.0};
  ThresholdConfig tc;
  tc.tau = 1.0;
  tc.tau_alpha = 2.0;
  const RunReport r = score_report(m, s, tc, 4);
  const auto it = std::find_if(r.groupings.begin(), r.groupings.end(),
                               [](const GroupingRow& g) { return g.kind == "alpha"; });
  ASSERT_NE(it, r.groupings.end());
  EXPECT_EQ(it->count, 3u);
  EXPECT_NEAR(it->nok_rate_per_telltale, 2.0 / 3.0, 1e-12);
  // level-3 rows are judged against 2.0, the level-8 row against 1.0
  EXPECT_NEAR(it->nok_rate_per_error_type, 1.0 / 3.0, 1e-12);
}

TEST(Report, ScoreFileJoin) {
  const auto dir = std::filesystem::temp_directory_path() / "tmon_reports_test";
  std::filesystem::create_directories(dir);
  const auto m = small_manifest();
  const std::vector<double> s{0.25, 1.0, 5.0, 0.5, 1.5, 3.0};
  write_scores(dir / "scores.csv", m, s);
  EXPECT_EQ(read_scores(dir / "scores.csv", m), s);

  auto extra = m;
  extra.rows.push_back(row("z.png", std::nullopt));
  EXPECT_THROW((void)read_scores(dir / "scores.csv", extra), DataError);
  auto fewer = m;
  fewer.rows.pop_back();
  EXPECT_THROW((void)read_scores(dir / "scores.csv", fewer), DataError);

  ThresholdConfig tc;
  tc.tau = 1.0;
  write_report(dir, score_report(m, s, tc));
  for (const char* f : {"report.csv", "sorted_scores.csv", "groupings.csv", "summary.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "report.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "telltale_id,error_kind,error_level,count,min_score,mean_score,max_score,nok_count,"
            "nok_rate");
  std::filesystem::remove_all(dir);
}
