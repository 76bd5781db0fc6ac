#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmon/features.hpp"
#include "tmon/imaging.hpp"

namespace tmon {

/// Channel-summed squared residual per spatial cell.
class AnomalyMap {
 public:
  AnomalyMap(int height, int width, std::vector<double> cells);

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] std::span<const double> cells() const noexcept { return cells_; }
  [[nodiscard]] double at(int y, int x) const noexcept {
    return cells_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                  static_cast<std::size_t>(x)];
  }

 private:
  int height_;
  int width_;
  std::vector<double> cells_;
};

inline constexpr double kNoClamp = std::numeric_limits<double>::infinity();

struct FreConfig {
  /// Relevant cells and their weights; all cells with weight 1 when absent.
  std::optional<ShapeMask> mask;
  /// Per-cell clamp on the squared residual; kNoClamp disables it.
  double d_max = 1.0;

  void validate() const;
  [[nodiscard]] std::uint64_t hash() const noexcept;
};

struct FreScore {
  double value = 0.0;
  std::uint64_t config_hash = 0;
  std::string pca_id;
};

AnomalyMap anomaly_map(const FeatureTensor& f, const FeatureTensor& reconstructed);

/// (1/|P|) * sqrt(sum_i w_i * min(cell_i, d_max)), |P| = sum_i w_i.
double fre_value(const AnomalyMap& map, const FreConfig& cfg);
FreScore fre(const FeatureTensor& f, const FeatureTensor& reconstructed, const FreConfig& cfg,
             std::string pca_id = {});

enum class Grouping { PerTelltale, PerErrorType };
enum class Expected { On, Off };
enum class Decision { Ok, Nok };

std::string_view to_string(Expected e) noexcept;
std::string_view to_string(Decision d) noexcept;
Expected parse_expected(std::string_view s);

struct ThresholdConfig {
  double tau = 1.0;
  double margin = 2.1;
  Grouping grouping = Grouping::PerTelltale;
  std::optional<double> tau_alpha;
  /// Threshold used when the telltale is expected OFF; defaults to tau.
  std::optional<double> tau_off;

  void validate() const;
  [[nodiscard]] double threshold_for(Expected e) const noexcept {
    return e == Expected::Off ? tau_off.value_or(tau) : tau;
  }
};

/// tau = max(good) * m. Throws ValidationError on an empty list,
/// non-finite scores, m < 1, or a non-positive result.
ThresholdConfig calibrate(std::span<const double> good_scores, double margin = 2.1);
ThresholdConfig calibrate(std::span<const FreScore> good_scores, double margin = 2.1);
/// tau_alpha = max(alpha-reduced good scores at one level) * m.
double calibrate_alpha(std::span<const double> alpha_scores, double margin = 2.1);
double calibrate_alpha(std::span<const FreScore> alpha_scores, double margin = 2.1);

/// Running mean over the last `window` scores.
class TemporalFilter {
 public:
  explicit TemporalFilter(std::size_t window = 60);

  /// Adds a score and returns the mean of the window contents.
  double push(double score);
  [[nodiscard]] double mean() const noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] std::size_t window() const noexcept { return window_; }
  void reset() noexcept { values_.clear(); }

 private:
  std::size_t window_;
  std::deque<double> values_;
};

struct Verdict {
  std::string telltale_id;
  std::uint64_t frame_id = 0;
  std::string pca_id;
  Decision decision = Decision::Ok;
  double raw_score = 0.0;
  double filtered_score = 0.0;
  double tau = 0.0;
  Expected expected = Expected::On;
  /// Per-PCA verdicts that were combined into this one.
  std::vector<Verdict> members;

  [[nodiscard]] bool ok() const noexcept { return decision == Decision::Ok; }
  [[nodiscard]] double relative_score() const noexcept { return filtered_score / tau; }
};

/// ON: OK iff score < tau. OFF: NOK iff score < tau_off.
Verdict decide(double score, const ThresholdConfig& tc, Expected expected);
Verdict decide(double raw_score, double filtered_score, const ThresholdConfig& tc,
               Expected expected);

enum class CombinePolicy { AllOk, AnyOk, FullOnly };
std::string_view to_string(CombinePolicy p) noexcept;
CombinePolicy parse_combine_policy(std::string_view s);

/// ALL_OK: OK iff every member is OK. ANY_OK: OK iff some member is OK.
/// FULL_ONLY: the verdict of the member whose pca_id is "full".
Verdict combine(std::span<const Verdict> verdicts, CombinePolicy policy);

/// CSV columns: frame_id,telltale_id,pca_id,raw_score,filtered_score,tau,
/// expected_state,verdict
std::string verdict_csv_header();
std::string verdict_csv_row(const Verdict& v);
/// "%.9g" formatting shared by the CSV writers.
std::string format_number(double v);

}  // namespace tmon
