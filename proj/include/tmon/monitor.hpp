#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmon/imaging.hpp"
#include "tmon/pca.hpp"
#include "tmon/pipeline.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

/// One persisted PCA bank and the thresholds of its models.
struct BankRef {
  std::filesystem::path file;
  /// One threshold per model in the bank, in bank order.
  std::vector<ThresholdConfig> thresholds;
};

struct TelltaleEntry {
  TelltaleAsset asset;
  /// Crop window in the frame. The icon is expected centered in it.
  Roi roi;
  /// Display transform to undo before scoring.
  std::optional<GeomTransform> transform;
  FreSettings fre;
  std::vector<BankRef> banks;
  CombinePolicy combine = CombinePolicy::AllOk;
};

struct MonitorConfig {
  int frame_width = 0;
  int frame_height = 0;
  std::size_t window = 60;
  /// Extractor weights file; the built-in bank is used when empty.
  std::optional<std::filesystem::path> weights;
  std::uint64_t builtin_seed = 0;
  int input_size = 128;
  std::vector<TelltaleEntry> telltales;
  /// Worker threads for the per-telltale fan-out (0: hardware concurrency).
  unsigned threads = 0;

  void validate() const;
};

/// JSON document; relative paths are resolved against the file's directory.
///
///   { "frame": {"width": W, "height": H}, "window": 60, "threads": 0,
///     "extractor": {"weights": "bank.fbnk" | null, "builtin_seed": 0, "input_size": 128},
///     "telltales": [ { "id": "brake", "asset": "brake.png" | "builtin:brake",
///        "roi": {"x": 0, "y": 0, "w": 52, "h": 52}, "transform": [a, b, c, d, e, f],
///        "fre": {"mask": "binary", "bg_weight": 0.0, "d_max": 1.0}, "combine": "all",
///        "banks": [ {"file": "brake_full.fpca", "tau": [0.01], "tau_off": [0.01]} ] } ] }
MonitorConfig load_monitor_config(const std::filesystem::path& path);
void save_monitor_config(const std::filesystem::path& path, const MonitorConfig& cfg);

/// Frame-level verification: crop, optional de-warp, features, per-model
/// FRE, temporal filter, decision and combination per telltale.
class Monitor {
 public:
  explicit Monitor(MonitorConfig cfg);

  [[nodiscard]] const MonitorConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::size_t telltale_count() const noexcept { return branches_.size(); }
  [[nodiscard]] std::size_t telltale_index(const std::string& id) const;

  /// One combined verdict per telltale, in registry order.
  std::vector<Verdict> check_frame(const Image& frame, const std::map<std::string, Expected>& active);

  /// Reloads every bank from its file and clears all temporal filters.
  /// Throws ConfigError when a file cannot be loaded.
  void reset_scoring_stage();

  /// Scoring stage access, shared with the testing mode.
  [[nodiscard]] const Extractor& extractor() const noexcept { return extractor_; }
  /// Feature tensor of an ROI-sized crop (de-warped when configured).
  [[nodiscard]] FeatureTensor crop_features(std::size_t telltale, const Image& crop) const;
  [[nodiscard]] const ScoringStage& stage(std::size_t telltale, std::size_t bank) const;
  [[nodiscard]] std::size_t bank_count(std::size_t telltale) const;
  /// Fault-injection hook: in-memory bank of the live scoring stage.
  [[nodiscard]] PcaBank& mutable_bank(std::size_t telltale, std::size_t bank);
  /// Number of frames currently held by a telltale's first filter.
  [[nodiscard]] std::size_t filter_fill(std::size_t telltale) const;

 private:
  struct Branch {
    std::vector<ScoringStage> stages;
    std::vector<std::vector<TemporalFilter>> filters;  // [bank][model]
  };

  Branch load_branch(const TelltaleEntry& entry) const;
  Verdict run_branch(std::size_t i, const Image& frame, Expected expected, std::uint64_t frame_id);

  MonitorConfig cfg_;
  Extractor extractor_;
  std::vector<Branch> branches_;
  std::uint64_t next_frame_ = 0;
};

}  // namespace tmon
