#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmon/datagen.hpp"
#include "tmon/pca.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

struct BucketStats {
  std::string telltale_id;
  /// "good" or an error kind name.
  std::string kind;
  int level = 0;
  std::size_t count = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::size_t nok = 0;
  [[nodiscard]] double nok_rate() const noexcept {
    return count == 0 ? 0.0 : static_cast<double>(nok) / static_cast<double>(count);
  }
};

/// NOK rate of one kind under both threshold groupings. The per-error-type
/// grouping judges alpha rows at or below the permitted level against
/// tau_alpha instead of tau.
struct GroupingRow {
  std::string kind;
  std::size_t count = 0;
  double nok_rate_per_telltale = 0.0;
  double nok_rate_per_error_type = 0.0;
};

struct RunReport {
  double tau = 0.0;
  double margin = 0.0;
  std::optional<double> tau_alpha;
  std::optional<int> alpha_level;
  /// Sorted by (telltale, kind, level).
  std::vector<BucketStats> buckets;
  std::size_t good_count = 0;
  std::size_t false_alarms = 0;
  /// Ascending scores per kind.
  std::map<std::string, std::vector<double>> sorted_scores;
  std::vector<GroupingRow> groupings;

  [[nodiscard]] const BucketStats* find(const std::string& kind, int level) const;
  /// Count and NOK count of a kind over all levels, or over levels >= min_level.
  [[nodiscard]] BucketStats kind_total(const std::string& kind, int min_level = 0) const;
};

/// Scores aligned with manifest rows; NOK iff score >= tau (telltales are
/// expected ON in every dataset row). Throws DataError on a size mismatch.
RunReport score_report(const DatasetManifest& manifest, std::span<const double> scores,
                       const ThresholdConfig& tc, std::optional<int> alpha_level = std::nullopt);

/// CSV columns: image_path,score
void write_scores(const std::filesystem::path& path, const DatasetManifest& manifest,
                  std::span<const double> scores);
/// Joins a score file against a manifest by image path. Throws DataError
/// when a manifest row has no score or a score has no row.
std::vector<double> read_scores(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Writes report.csv (telltale_id,error_kind,error_level,count,min_score,
/// mean_score,max_score,nok_count,nok_rate), sorted_scores.csv
/// (error_kind,rank,score), groupings.csv (error_kind,count,
/// nok_rate_per_telltale,nok_rate_per_error_type) and summary.csv (key,value).
void write_report(const std::filesystem::path& dir, const RunReport& report);
/// Min/mean/max per kind as a static SVG chart.
void write_report_svg(const std::filesystem::path& path, const RunReport& report);

struct ChannelReport {
  int channel = 0;
  std::string pca_id;
  double tau = 0.0;
  double good_pass_rate = 0.0;
  /// Highest level accepted per kind, -1 when no row of the kind is
  /// accepted. Unleveled kinds count as level 10.
  std::map<std::string, int> max_ok_level;
  std::size_t errors_rejected = 0;
  std::size_t error_count = 0;
  bool rejects_norender = false;
  /// Zero-variance channel or all-zero good scores.
  bool degenerate = false;
  [[nodiscard]] bool separates() const noexcept {
    return !degenerate && good_pass_rate == 1.0 && rejects_norender;
  }
};

struct FeatureReport {
  double margin = 1.2;
  /// Ranked: separating channels first, then by rejected error rows,
  /// then by channel index.
  std::vector<ChannelReport> channels;
  [[nodiscard]] std::size_t separating_count() const;
};

/// tau per channel from the calibration goods, then acceptance on the
/// evaluation rows. FloodBackground rows are not counted as errors.
FeatureReport feature_report(const PcaBank& bank, const std::vector<std::vector<double>>& calib_scores,
                             const DatasetManifest& calib,
                             const std::vector<std::vector<double>>& eval_scores,
                             const DatasetManifest& eval, double margin = 1.2);

/// CSV columns: rank,channel,pca_id,tau,good_pass_rate,errors_rejected,
/// error_count,rejects_norender,degenerate,separates, then one
/// max_ok_<kind> column per kind.
void write_feature_report(const std::filesystem::path& path, const FeatureReport& report);
void write_feature_report_svg(const std::filesystem::path& path, const FeatureReport& report);

}  // namespace tmon
