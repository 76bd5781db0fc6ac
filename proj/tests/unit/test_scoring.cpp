#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "tmon/error.hpp"
#include "tmon/rng.hpp"
#include "tmon/scoring.hpp"

using namespace tmon;

namespace {

FeatureTensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  FeatureTensor t(c, h, w);
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

FreConfig plain() {
  FreConfig c;
  c.d_max = kNoClamp;
  return c;
}

}  // namespace

TEST(AnomalyMap, ZeroAndSingleResidual) {
  const auto f = random_tensor(3, 4, 4, 1);
  const auto zero = anomaly_map(f, f);
  for (double v : zero.cells()) EXPECT_EQ(v, 0.0);
  auto r = f;
  r.data()[1 * 16 + 2 * 4 + 3] += 0.5f;
  const auto m = anomaly_map(f, r);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      if (y == 2 && x == 3) {
        EXPECT_NEAR(m.at(y, x), 0.25, 1e-6);
      } else {
        EXPECT_EQ(m.at(y, x), 0.0);
      }
    }
}

TEST(AnomalyMap, MatchesTripleLoop) {
  const auto f = random_tensor(7, 5, 6, 2);
  const auto r = random_tensor(7, 5, 6, 3);
  const auto m = anomaly_map(f, r);
  const auto ref = oracle::anomaly_cells(f, r);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(m.cells()[i], ref[i], 1e-9);
  EXPECT_THROW((void)anomaly_map(f, random_tensor(7, 5, 5, 4)), ShapeError);
}

TEST(Fre, Examples) {
  const auto f = random_tensor(2, 4, 4, 5);
  EXPECT_EQ(fre(f, f, FreConfig{}).value, 0.0);
  std::vector<double> cells(16, 0.0);
  cells[5] = 100.0;
  FreConfig c;
  c.d_max = 4.0;
  EXPECT_DOUBLE_EQ(fre_value(AnomalyMap(4, 4, cells), c), 0.125);
  std::vector<double> w(16, 1.0);
  w[5] = 0.0;
  c.mask = ShapeMask(4, 4, w);
  EXPECT_EQ(fre_value(AnomalyMap(4, 4, cells), c), 0.0);
}

TEST(Fre, WeightedMaskAndDegenerate) {
  std::vector<double> cells = {4.0, 9.0, 0.0, 1.0};
  FreConfig c = plain();
  c.mask = ShapeMask(2, 2, {1.0, 0.5, 0.0, 0.25});
  EXPECT_NEAR(fre_value(AnomalyMap(2, 2, cells), c), std::sqrt(4.0 + 4.5 + 0.25) / 1.75, 1e-12);
  EXPECT_THROW(ShapeMask(2, 2, {0.0, 0.0, 0.0, 0.0}), DegenerateMaskError);
  FreConfig bad;
  bad.d_max = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Fre, ClampDominanceAndSingleElementBound) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> cells(64);
    for (auto& v : cells) v = rng.uniform() * (t % 2 ? 3.0 : 0.9);
    const AnomalyMap m(8, 8, cells);
    FreConfig clamp;
    clamp.d_max = 1.0;
    const double a = fre_value(m, clamp);
    const double b = fre_value(m, plain());
    EXPECT_LE(a, b);
    if (t % 2 == 0) EXPECT_EQ(a, b);
  }
  std::vector<double> one(64, 0.0);
  one[10] = 1e6;
  FreConfig c;
  c.d_max = 2.0;
  EXPECT_LE(fre_value(AnomalyMap(8, 8, one), c), std::sqrt(2.0) / 64.0 + 1e-15);
}

TEST(Fre, MaskLocality) {
  Rng rng(7);
  std::vector<double> w(16, 0.0);
  for (int i : {1, 2, 5, 6}) w[i] = 1.0;
  FreConfig c;
  c.mask = ShapeMask(4, 4, w);
  std::vector<double> cells(16);
  for (auto& v : cells) v = rng.uniform();
  const double base = fre_value(AnomalyMap(4, 4, cells), c);
  for (int t = 0; t < 100; ++t) {
    auto changed = cells;
    for (int i = 0; i < 16; ++i)
      if (w[i] == 0.0) changed[i] = rng.uniform() * 100.0;
    EXPECT_EQ(fre_value(AnomalyMap(4, 4, changed), c), base);
  }
}

TEST(Calibrate, Examples) {
  const std::vector<double> s = {0.1, 0.5, 0.3};
  EXPECT_NEAR(calibrate(s, 2.1).tau, 1.05, 1e-12);
  const std::vector<double> one = {0.4};
  EXPECT_NEAR(calibrate(one, 2.1).tau, 0.84, 1e-12);
  EXPECT_EQ(calibrate(s, 1.0).tau, 0.5);
  EXPECT_THROW((void)calibrate(std::vector<double>{}, 2.1), ValidationError);
  EXPECT_THROW((void)calibrate(s, 0.9), ValidationError);
  EXPECT_EQ(calibrate_alpha(s, 2.1), calibrate(s, 2.1).tau);
  EXPECT_THROW((void)calibrate_alpha(std::vector<double>{}, 2.1), ValidationError);
}

TEST(TemporalFilter, Means) {
  TemporalFilter f(60);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(f.push(0.25), 0.25);
  TemporalFilter g(60);
  for (int i = 0; i < 59; ++i) g.push(0.5);
  EXPECT_DOUBLE_EQ(g.push(30.5), (59 * 0.5 + 30.5) / 60.0);
  TemporalFilter w1(1);
  w1.push(3.0);
  EXPECT_EQ(w1.push(7.0), 7.0);
  TemporalFilter warm(60);
  EXPECT_EQ(warm.push(2.0), 2.0);
  EXPECT_EQ(warm.push(4.0), 3.0);
}

TEST(Decide, OnOffAndBoundary) {
  ThresholdConfig tc;
  tc.tau = 1.05;
  EXPECT_EQ(decide(0.2, tc, Expected::On).decision, Decision::Ok);
  EXPECT_EQ(decide(0.2, tc, Expected::Off).decision, Decision::Nok);
  EXPECT_EQ(decide(1.05, tc, Expected::On).decision, Decision::Nok);
  EXPECT_EQ(decide(1.05, tc, Expected::Off).decision, Decision::Ok);
  tc.tau_off = 0.1;
  EXPECT_EQ(decide(0.2, tc, Expected::Off).decision, Decision::Ok);
}

TEST(Decide, MonotoneInScore) {
  ThresholdConfig tc;
  tc.tau = 0.7;
  bool nok = false;
  for (double s = 0.0; s < 2.0; s += 0.01) {
    const bool now = !decide(s, tc, Expected::On).ok();
    EXPECT_TRUE(now || !nok);
    nok = now;
  }
}

TEST(Decide, FilteredStabilityUnderSpike) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    ThresholdConfig tc;
    tc.tau = 0.5 + rng.uniform();
    const double mean = rng.uniform() * tc.tau / 1.01;
    const double spike = 60.0 * (tc.tau * 0.99 - mean) + mean;
    TemporalFilter f(60);
    for (int i = 0; i < 59; ++i) f.push(mean);
    const double filtered = f.push(spike);
    EXPECT_TRUE(decide(spike, filtered, tc, Expected::On).ok());
  }
}

TEST(Combine, Policies) {
  auto v = [](Decision d, const char* id) {
    Verdict x;
    x.decision = d;
    x.pca_id = id;
    return x;
  };
  const std::vector<Verdict> all_ok = {v(Decision::Ok, "full"), v(Decision::Ok, "ch1")};
  const std::vector<Verdict> one_nok = {v(Decision::Ok, "full"), v(Decision::Nok, "ch1")};
  const std::vector<Verdict> one_ok = {v(Decision::Nok, "full"), v(Decision::Ok, "ch1")};
  EXPECT_TRUE(combine(all_ok, CombinePolicy::AllOk).ok());
  EXPECT_FALSE(combine(one_nok, CombinePolicy::AllOk).ok());
  EXPECT_TRUE(combine(one_ok, CombinePolicy::AnyOk).ok());
  EXPECT_FALSE(combine(one_ok, CombinePolicy::FullOnly).ok());
  EXPECT_THROW((void)combine(std::vector<Verdict>{}, CombinePolicy::AllOk), ValidationError);
}

TEST(VerdictCsv, HeaderAndRow) {
  EXPECT_EQ(verdict_csv_header(),
            "frame_id,telltale_id,pca_id,raw_score,filtered_score,tau,expected_state,verdict");
  Verdict v;
  v.telltale_id = "brake";
  v.frame_id = 3;
  v.pca_id = "full";
  v.raw_score = 0.5;
  v.filtered_score = 0.25;
  v.tau = 1.0;
  EXPECT_EQ(verdict_csv_row(v), "3,brake,full,0.5,0.25,1,ON,OK");
}
