#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tmon/features.hpp"

namespace tmon {

/// Keep exactly k components.
struct RetainCount {
  int k = 1;
};
/// Keep the smallest k whose cumulative explained-variance ratio reaches q.
struct RetainVariance {
  double q = 0.95;
};
using Retention = std::variant<RetainCount, RetainVariance>;

std::string describe(const Retention& r);

/// Mean plus an orthonormal basis of retained principal directions.
/// transform: f' = V (f - mean); inverse_transform: f'' = V^T f' + mean.
class PcaModel {
 public:
  PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd explained_ratio,
           Eigen::VectorXd eigenvalues = {});

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(mean_.size()); }
  [[nodiscard]] int n_components() const noexcept { return static_cast<int>(components_.rows()); }
  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
  /// n_components x dim, orthonormal rows.
  [[nodiscard]] const Eigen::MatrixXd& components() const noexcept { return components_; }
  [[nodiscard]] const Eigen::VectorXd& explained_variance_ratio() const noexcept {
    return ratio_;
  }
  /// Covariance eigenvalues (1/(N-1) normalization). Only populated on
  /// freshly fitted models; the model file does not carry them.
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

  [[nodiscard]] Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& f) const;
  [[nodiscard]] Eigen::VectorXd inverse_transform(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  /// inverse_transform(transform(f)).
  [[nodiscard]] Eigen::VectorXd reconstruct(const Eigen::Ref<const Eigen::VectorXd>& f) const;
  /// Float input/output variant used on the hot path.
  void reconstruct(std::span<const float> f, std::span<float> out) const;
  /// Single-precision reconstruction of every column of x (dim x n).
  [[nodiscard]] Eigen::MatrixXf reconstruct_batch(const Eigen::Ref<const Eigen::MatrixXf>& x) const;

  /// Mutable mean access for fault-injection tests of the scoring stage.
  Eigen::VectorXd& mutable_mean() noexcept { return mean_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  Eigen::VectorXd ratio_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXf components_f_;
};

/// Fits a PCA to the rows of `samples` (N x dim) via the singular value
/// decomposition of the centered matrix. Components follow a fixed sign
/// convention: the largest-magnitude entry of each is positive.
/// Throws InsufficientDataError (N < 2), ValidationError (infeasible
/// retention), RankError (rank below the requested count).
PcaModel fit(const Eigen::MatrixXd& samples, const Retention& retain = RetainVariance{});

enum class BankMode { Full, PerFeature };

/// One full-tensor model, or one model per selected channel.
class PcaBank {
 public:
  PcaBank(BankMode mode, int channels, int height, int width, std::vector<int> selected,
          std::vector<PcaModel> models);

  [[nodiscard]] BankMode mode() const noexcept { return mode_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  /// Channel indices for PerFeature banks (empty for Full).
  [[nodiscard]] const std::vector<int>& selected() const noexcept { return selected_; }
  [[nodiscard]] std::size_t size() const noexcept { return models_.size(); }
  [[nodiscard]] const PcaModel& model(std::size_t i) const { return models_.at(i); }
  [[nodiscard]] PcaModel& mutable_model(std::size_t i) { return models_.at(i); }
  [[nodiscard]] const std::vector<PcaModel>& models() const noexcept { return models_; }

  /// Vector fed to model i: the whole tensor channel-major (Full) or one
  /// channel's H*W plane (PerFeature).
  [[nodiscard]] std::span<const float> model_input(const FeatureTensor& f, std::size_t i) const;
  /// f with the part covered by model i replaced by its reconstruction;
  /// uncovered channels are copied unchanged.
  [[nodiscard]] FeatureTensor roundtrip(const FeatureTensor& f, std::size_t i) const;
  /// Short label such as "full" or "ch17".
  [[nodiscard]] std::string model_label(std::size_t i) const;

 private:
  void check_shape(const FeatureTensor& f) const;

  BankMode mode_;
  int channels_;
  int height_;
  int width_;
  std::vector<int> selected_;
  std::vector<PcaModel> models_;
};

/// Full: one model over C*H*W vectors. PerFeature: one model per entry of
/// `channels` (all channels when empty) over H*W planes.
PcaBank fit_bank(std::span<const FeatureTensor> tensors, BankMode mode,
                 const Retention& retain = RetainVariance{}, std::vector<int> channels = {},
                 unsigned threads = 0);

/// Model file ("FPCA1").
std::vector<std::uint8_t> serialize_bank(const PcaBank& bank);
PcaBank parse_bank(std::span<const std::uint8_t> bytes);
void save_bank(const std::filesystem::path& path, const PcaBank& bank);
PcaBank load_bank(const std::filesystem::path& path);

}  // namespace tmon
