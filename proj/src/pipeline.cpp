#include "tmon/pipeline.hpp"

#include <optional>

#include "tmon/error.hpp"
#include "tmon/parallel.hpp"

namespace tmon {

FeatureTensor Extractor::operator()(const Image& crop) const {
  if (crop.width() == input_size && crop.height() == input_size) return extract(crop, bank, norm);
  return extract(resize_bilinear(crop, input_size, input_size), bank, norm);
}

std::vector<FeatureTensor> Extractor::all(std::span<const Image> crops, unsigned threads) const {
  std::vector<std::optional<FeatureTensor>> slots(crops.size());
  parallel_for(crops.size(), [&](std::size_t i) { slots[i] = (*this)(crops[i]); }, threads);
  std::vector<FeatureTensor> out;
  out.reserve(crops.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

AnomalyMap ScoringStage::map(const FeatureTensor& f, std::size_t model) const {
  return anomaly_map(f, bank.roundtrip(f, model));
}

std::vector<FreScore> ScoringStage::score(const FeatureTensor& f) const {
  std::vector<FreScore> out;
  out.reserve(bank.size());
  for (std::size_t m = 0; m < bank.size(); ++m) {
    out.push_back({fre_value(map(f, m), fre), fre.hash(), bank.model_label(m)});
  }
  return out;
}

std::vector<std::vector<double>> ScoringStage::score_batch(std::span<const FeatureTensor> fs,
                                                           unsigned threads) const {
  std::vector<std::vector<double>> out(fs.size(), std::vector<double>(bank.size()));
  if (fs.empty()) return out;
  if (bank.mode() == BankMode::PerFeature) {
    parallel_for(fs.size(), [&](std::size_t i) {
      for (std::size_t m = 0; m < bank.size(); ++m) out[i][m] = fre_value(map(fs[i], m), fre);
    }, threads);
    return out;
  }
  const auto dim = static_cast<Eigen::Index>(fs[0].size());
  Eigen::MatrixXf x(dim, static_cast<Eigen::Index>(fs.size()));
  for (std::size_t i = 0; i < fs.size(); ++i) {
    (void)bank.model_input(fs[i], 0);
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXf>(fs[i].data().data(), dim);
  }
  const Eigen::MatrixXf rec = bank.model(0).reconstruct_batch(x);
  parallel_for(fs.size(), [&](std::size_t i) {
    const auto col = static_cast<Eigen::Index>(i);
    std::vector<float> data(rec.col(col).data(), rec.col(col).data() + dim);
    const FeatureTensor r(fs[i].channels(), fs[i].height(), fs[i].width(), std::move(data));
    out[i][0] = fre_value(anomaly_map(fs[i], r), fre);
  }, threads);
  return out;
}

std::string_view to_string(MaskChoice m) noexcept {
  switch (m) {
    case MaskChoice::None: return "none";
    case MaskChoice::Binary: return "binary";
    case MaskChoice::Weighted: return "weighted";
  }
  return "binary";
}

MaskChoice parse_mask_choice(std::string_view s) {
  if (s == "none") return MaskChoice::None;
  if (s == "binary") return MaskChoice::Binary;
  if (s == "weighted") return MaskChoice::Weighted;
  throw ValidationError("mask must be none, binary or weighted, got '" + std::string(s) + "'");
}

FreConfig make_fre_config(const FreSettings& s, const TelltaleAsset& asset,
                          const CropLayout& layout, int height, int width) {
  FreConfig cfg;
  cfg.d_max = s.d_max;
  if (s.mask != MaskChoice::None) {
    cfg.mask = shape_mask(asset, layout, height, width,
                          s.mask == MaskChoice::Binary ? MaskMode::Binary : MaskMode::Weighted,
                          s.bg_weight);
  }
  cfg.validate();
  return cfg;
}

std::vector<double> column(const std::vector<std::vector<double>>& scores, std::size_t model) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const auto& row : scores) v.push_back(row.at(model));
  return v;
}

std::vector<double> column(const std::vector<std::vector<FreScore>>& scores, std::size_t model) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const auto& row : scores) v.push_back(row.at(model).value);
  return v;
}

}  // namespace tmon
