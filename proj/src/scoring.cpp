#include "tmon/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "binary_io.hpp"
#include "tmon/error.hpp"

namespace tmon {

AnomalyMap::AnomalyMap(int height, int width, std::vector<double> cells)
    : height_(height), width_(width), cells_(std::move(cells)) {
  if (height < 1 || width < 1) throw ShapeError("anomaly map dimensions must be >= 1");
  if (cells_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("anomaly map cell count mismatch");
  }
}

void FreConfig::validate() const {
  if (!(d_max > 0.0)) throw ValidationError("d_max must be positive");
}

std::uint64_t FreConfig::hash() const noexcept {
  io::Writer w;
  w.bytes("FRE");
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d_max, sizeof bits);
  w.u32(static_cast<std::uint32_t>(bits));
  w.u32(static_cast<std::uint32_t>(bits >> 32));
  if (mask) {
    w.u32(static_cast<std::uint32_t>(mask->height()));
    w.u32(static_cast<std::uint32_t>(mask->width()));
    for (double v : mask->weights()) w.f32(static_cast<float>(v));
  }
  return io::fnv1a(w.data());
}

AnomalyMap anomaly_map(const FeatureTensor& f, const FeatureTensor& reconstructed) {
  if (!f.same_shape(reconstructed)) throw ShapeError("anomaly_map: tensor shapes differ");
  const std::size_t plane = f.plane_size();
  std::vector<double> cells(plane, 0.0);
  for (int c = 0; c < f.channels(); ++c) {
    const auto a = f.channel(c);
    const auto b = reconstructed.channel(c);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
      cells[i] += d * d;
    }
  }
  return AnomalyMap(f.height(), f.width(), std::move(cells));
}

double fre_value(const AnomalyMap& map, const FreConfig& cfg) {
  cfg.validate();
  const auto cells = map.cells();
  double sum = 0.0;
  double weight = 0.0;
  if (cfg.mask) {
    if (cfg.mask->height() != map.height() || cfg.mask->width() != map.width()) {
      throw ShapeError("mask dimensions do not match the anomaly map");
    }
    const auto w = cfg.mask->weights();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (w[i] <= 0.0) continue;
      sum += w[i] * std::min(cells[i], cfg.d_max);
      weight += w[i];
    }
  } else {
    for (double v : cells) sum += std::min(v, cfg.d_max);
    weight = static_cast<double>(cells.size());
  }
  if (!(weight > 0.0)) throw DegenerateMaskError("no relevant cells for the score");
  return std::sqrt(sum) / weight;
}

FreScore fre(const FeatureTensor& f, const FeatureTensor& reconstructed, const FreConfig& cfg,
             std::string pca_id) {
  return {fre_value(anomaly_map(f, reconstructed), cfg), cfg.hash(), std::move(pca_id)};
}

std::string_view to_string(Expected e) noexcept { return e == Expected::On ? "ON" : "OFF"; }
std::string_view to_string(Decision d) noexcept { return d == Decision::Ok ? "OK" : "NOK"; }

Expected parse_expected(std::string_view s) {
  if (s == "ON" || s == "on") return Expected::On;
  if (s == "OFF" || s == "off") return Expected::Off;
  throw ValidationError("expected state must be ON or OFF, got '" + std::string(s) + "'");
}

void ThresholdConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive");
  if (!(margin >= 1.0)) throw ValidationError("margin must be >= 1");
  if (tau_off && !(*tau_off > 0.0)) throw ValidationError("tau_off must be positive");
  if (tau_alpha && !(*tau_alpha > 0.0)) throw ValidationError("tau_alpha must be positive");
}

namespace {

double max_times_margin(std::span<const double> scores, double margin, const char* what) {
  if (scores.empty()) throw ValidationError(std::string(what) + ": no scores to calibrate on");
  if (!(margin >= 1.0)) throw ValidationError(std::string(what) + ": margin must be >= 1");
  double mx = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) {
      throw ValidationError(std::string(what) + ": scores must be finite and non-negative");
    }
    mx = std::max(mx, s);
  }
  const double tau = mx * margin;
  if (!(tau > 0.0)) throw ValidationError(std::string(what) + ": all scores are zero");
  return tau;
}

std::vector<double> values(std::span<const FreScore> scores) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const auto& s : scores) v.push_back(s.value);
  return v;
}

}  // namespace

ThresholdConfig calibrate(std::span<const double> good_scores, double margin) {
  ThresholdConfig tc;
  tc.tau = max_times_margin(good_scores, margin, "calibrate");
  tc.margin = margin;
  return tc;
}

ThresholdConfig calibrate(std::span<const FreScore> good_scores, double margin) {
  const auto v = values(good_scores);
  return calibrate(std::span<const double>(v), margin);
}

double calibrate_alpha(std::span<const double> alpha_scores, double margin) {
  return max_times_margin(alpha_scores, margin, "calibrate_alpha");
}

double calibrate_alpha(std::span<const FreScore> alpha_scores, double margin) {
  const auto v = values(alpha_scores);
  return calibrate_alpha(std::span<const double>(v), margin);
}

TemporalFilter::TemporalFilter(std::size_t window) : window_(window) {
  if (window < 1) throw ValidationError("temporal window must be >= 1");
}

double TemporalFilter::push(double score) {
  values_.push_back(score);
  if (values_.size() > window_) values_.pop_front();
  return mean();
}

double TemporalFilter::mean() const noexcept {
  if (values_.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

Verdict decide(double raw_score, double filtered_score, const ThresholdConfig& tc,
               Expected expected) {
  if (!std::isfinite(filtered_score)) throw ValidationError("decide: score is not finite");
  Verdict v;
  v.raw_score = raw_score;
  v.filtered_score = filtered_score;
  v.expected = expected;
  v.tau = tc.threshold_for(expected);
  const bool below = filtered_score < v.tau;
  // ON: a low score means the icon is rendered correctly. OFF: a low score
  // means an icon is visible that should not be.
  v.decision = (expected == Expected::On) == below ? Decision::Ok : Decision::Nok;
  return v;
}

Verdict decide(double score, const ThresholdConfig& tc, Expected expected) {
  return decide(score, score, tc, expected);
}

std::string_view to_string(CombinePolicy p) noexcept {
  switch (p) {
    case CombinePolicy::AllOk: return "all";
    case CombinePolicy::AnyOk: return "any";
    case CombinePolicy::FullOnly: return "full";
  }
  return "all";
}

CombinePolicy parse_combine_policy(std::string_view s) {
  if (s == "all" || s == "ALL_OK") return CombinePolicy::AllOk;
  if (s == "any" || s == "ANY_OK") return CombinePolicy::AnyOk;
  if (s == "full" || s == "FULL_ONLY") return CombinePolicy::FullOnly;
  throw ValidationError("combine policy must be all, any or full, got '" + std::string(s) + "'");
}

Verdict combine(std::span<const Verdict> verdicts, CombinePolicy policy) {
  if (verdicts.empty()) throw ValidationError("combine: no verdicts");
  const Verdict* chosen = nullptr;
  auto ratio = [](const Verdict& v) { return v.filtered_score / v.tau; };
  switch (policy) {
    case CombinePolicy::FullOnly:
      for (const auto& v : verdicts) {
        if (v.pca_id == "full") {
          chosen = &v;
          break;
        }
      }
      if (chosen == nullptr) throw ValidationError("combine: FULL_ONLY without a full-PCA verdict");
      break;
    case CombinePolicy::AllOk:
      // The first failing member decides; otherwise report the tightest one.
      for (const auto& v : verdicts) {
        if (!v.ok()) {
          chosen = &v;
          break;
        }
      }
      if (chosen == nullptr) {
        chosen = &*std::max_element(verdicts.begin(), verdicts.end(),
                                    [&](const auto& a, const auto& b) { return ratio(a) < ratio(b); });
      }
      break;
    case CombinePolicy::AnyOk:
      for (const auto& v : verdicts) {
        if (v.ok()) {
          chosen = &v;
          break;
        }
      }
      if (chosen == nullptr) {
        chosen = &*std::min_element(verdicts.begin(), verdicts.end(),
                                    [&](const auto& a, const auto& b) { return ratio(a) < ratio(b); });
      }
      break;
  }
  Verdict out = *chosen;
  out.members.assign(verdicts.begin(), verdicts.end());
  for (auto& m : out.members) m.members.clear();
  if (verdicts.size() > 1 && policy != CombinePolicy::FullOnly) {
    out.pca_id = policy == CombinePolicy::AllOk ? "all" : "any";
  }
  return out;
}

std::string verdict_csv_header() {
  return "frame_id,telltale_id,pca_id,raw_score,filtered_score,tau,expected_state,verdict";
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string verdict_csv_row(const Verdict& v) {
  std::string row = std::to_string(v.frame_id);
  for (const std::string& field :
       {v.telltale_id, v.pca_id, format_number(v.raw_score), format_number(v.filtered_score),
        format_number(v.tau), std::string(to_string(v.expected)),
        std::string(to_string(v.decision))}) {
    row += ',';
    row += field;
  }
  return row;
}

}  // namespace tmon
