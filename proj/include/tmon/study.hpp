#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tmon/datagen.hpp"
#include "tmon/pca.hpp"
#include "tmon/pipeline.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

/// Everything an evaluation study needs. Loaded from one JSON file whose
/// keys match the field names; CLI flags override individual fields.
struct StudyConfig {
  std::filesystem::path data_root = "data";
  std::filesystem::path out_dir = "out";
  /// Telltale PNG directory; the built-in set is used when empty.
  std::optional<std::filesystem::path> assets_dir;
  /// Ids to process; all when empty.
  std::vector<std::string> telltales;

  int backgrounds = 24;
  int background_size = 160;
  std::uint64_t background_seed = 7;
  std::optional<std::filesystem::path> user_backgrounds;

  int crop_size = 52;
  int train_count = 400;
  int test_per_bucket = 20;
  int eval_per_defect = 50;
  int eval_flood_per_kind = 50;
  std::uint64_t train_seed = 11;
  std::uint64_t test_seed = 12;
  std::uint64_t eval_seed = 13;

  std::optional<std::filesystem::path> weights;
  std::uint64_t builtin_seed = 0;
  int input_size = 128;

  Retention retention = RetainVariance{0.95};
  BankMode pca_mode = BankMode::Full;
  /// Channels for per-feature banks; all when empty.
  std::vector<int> channels;
  FreSettings fre;
  double margin = 2.1;
  /// Permitted alpha level for tau_alpha; none when empty.
  std::optional<int> alpha_level;
  CombinePolicy combine = CombinePolicy::AllOk;
  std::size_t window = 60;
  unsigned threads = 0;

  void validate() const;
};

StudyConfig load_study_config(const std::filesystem::path& path);
void save_study_config(const std::filesystem::path& path, const StudyConfig& cfg);

std::string_view to_string(BankMode m) noexcept;
/// "full" or "per-feature".
BankMode parse_bank_mode(std::string_view s);

/// Shared inputs of a study: assets, background pool and extractor.
struct StudyContext {
  StudyConfig cfg;
  std::vector<TelltaleAsset> assets;
  std::vector<Image> backgrounds;
  Extractor extractor;

  explicit StudyContext(StudyConfig config);

  [[nodiscard]] const TelltaleAsset& asset(const std::string& id) const;
  /// Assets selected by cfg.telltales, in configuration order.
  [[nodiscard]] std::vector<TelltaleAsset> selected() const;
  [[nodiscard]] DatasetGeometry geometry() const { return {cfg.crop_size}; }
  [[nodiscard]] int feature_side() const;
  [[nodiscard]] Dataset generate(const TelltaleAsset& asset, Split split) const;
  [[nodiscard]] FreConfig fre(const TelltaleAsset& asset) const;
  [[nodiscard]] PcaBank fit(std::span<const FeatureTensor> train) const;
  [[nodiscard]] std::vector<FeatureTensor> features(const Dataset& d) const;
};

/// Calibrated thresholds of one bank, in bank model order.
struct Thresholds {
  std::string telltale_id;
  BankMode mode = BankMode::Full;
  double margin = 2.1;
  std::vector<std::string> pca_ids;
  std::vector<double> tau;
  std::optional<int> alpha_level;
  std::optional<double> tau_alpha;

  [[nodiscard]] ThresholdConfig config(std::size_t model) const;
};

/// tau per model from the good rows of a calibration split; tau_alpha from
/// `alpha_scores` when given (one vector per model).
Thresholds calibrate_bank(const std::string& telltale_id, BankMode mode,
                          const std::vector<std::string>& pca_ids,
                          const std::vector<std::vector<double>>& scores,
                          const DatasetManifest& manifest, double margin);

void save_thresholds(const std::filesystem::path& path, const Thresholds& t);
Thresholds load_thresholds(const std::filesystem::path& path);

/// Alpha-reduced good renderings of every test good row at `level`.
std::vector<Image> alpha_renderings(const StudyContext& ctx, const TelltaleAsset& asset,
                                    const Dataset& test, int level);

/// Per-row verdict score: the raw score of a single-model bank, or the
/// combined relative score (score/tau) of a multi-model bank, compared
/// against 1.0 in that case.
std::vector<double> combined_scores(const std::vector<std::vector<double>>& scores,
                                    const Thresholds& t, CombinePolicy policy);

/// Output paths under cfg.out_dir.
std::filesystem::path bank_path(const StudyConfig& cfg, const std::string& id, BankMode mode);
std::filesystem::path thresholds_path(const StudyConfig& cfg, const std::string& id,
                                      BankMode mode);

}  // namespace tmon
