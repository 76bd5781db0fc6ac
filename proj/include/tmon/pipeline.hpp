#pragma once

#include <span>
#include <string>
#include <vector>

#include "tmon/features.hpp"
#include "tmon/pca.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

/// Crop -> bilinear resample to the extractor input -> conv features.
struct Extractor {
  FilterBank bank;
  Normalization norm;
  int input_size = 128;

  [[nodiscard]] FeatureTensor operator()(const Image& crop) const;
  [[nodiscard]] std::vector<FeatureTensor> all(std::span<const Image> crops,
                                               unsigned threads = 0) const;
};

/// A fitted PCA bank plus the FRE settings applied to its residuals.
struct ScoringStage {
  PcaBank bank;
  FreConfig fre;

  [[nodiscard]] AnomalyMap map(const FeatureTensor& f, std::size_t model) const;
  /// One score per bank model, in bank order.
  [[nodiscard]] std::vector<FreScore> score(const FeatureTensor& f) const;
  /// scores[i][m] for every tensor. Full banks use one single-precision
  /// matrix product for the whole batch, so values can differ from score()
  /// in the last bits.
  [[nodiscard]] std::vector<std::vector<double>> score_batch(std::span<const FeatureTensor> fs,
                                                             unsigned threads = 0) const;
};

enum class MaskChoice { None, Binary, Weighted };
std::string_view to_string(MaskChoice m) noexcept;
MaskChoice parse_mask_choice(std::string_view s);

/// Serializable FRE settings; the mask itself is derived from the asset.
struct FreSettings {
  MaskChoice mask = MaskChoice::Binary;
  double bg_weight = 0.0;
  double d_max = 1.0;
};

/// Mask for an icon placed at `layout` in the crop, at the feature size.
FreConfig make_fre_config(const FreSettings& s, const TelltaleAsset& asset,
                          const CropLayout& layout, int height, int width);

/// Per-sample values of one model's scores.
std::vector<double> column(const std::vector<std::vector<double>>& scores, std::size_t model);
std::vector<double> column(const std::vector<std::vector<FreScore>>& scores, std::size_t model);

}  // namespace tmon
