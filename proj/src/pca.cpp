#include "tmon/pca.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "binary_io.hpp"
#include "tmon/error.hpp"
#include "tmon/parallel.hpp"

namespace tmon {

namespace {

constexpr std::string_view kBankMagic = "FPCA1";
constexpr std::uint8_t kBankVersion = 1;

struct Decomposition {
  Eigen::VectorXd singular;  // descending
  Eigen::MatrixXd right;     // dim x r, right singular vectors as columns
};

// Thin SVD of the centered N x dim matrix, right vectors only. Wide inputs
// go through a Householder QR of X^T first so the SVD runs on N x N.
Decomposition thin_svd(const Eigen::MatrixXd& centered) {
  const Eigen::Index n = centered.rows();
  const Eigen::Index dim = centered.cols();
  if (dim > n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(centered.transpose());
    const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    // X = R^T Q^T, so X's right singular vectors are Q times those of R^T.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(r.transpose(), Eigen::ComputeThinV);
    Eigen::MatrixXd right = Eigen::MatrixXd::Zero(dim, n);
    right.topRows(n) = svd.matrixV();
    right.applyOnTheLeft(qr.householderQ());
    return {svd.singularValues(), std::move(right)};
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  return {svd.singularValues(), svd.matrixV()};
}

}  // namespace

std::string describe(const Retention& r) {
  if (const auto* c = std::get_if<RetainCount>(&r)) return "count(" + std::to_string(c->k) + ")";
  return "variance(" + std::to_string(std::get<RetainVariance>(r).q) + ")";
}

PcaModel::PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components,
                   Eigen::VectorXd explained_ratio, Eigen::VectorXd eigenvalues)
    : mean_(std::move(mean)),
      components_(std::move(components)),
      ratio_(std::move(explained_ratio)),
      eigenvalues_(std::move(eigenvalues)) {
  if (mean_.size() < 2) throw ValidationError("PCA dimension must be >= 2");
  if (components_.cols() != mean_.size()) throw ShapeError("component width != dim");
  if (components_.rows() >= mean_.size()) {
    throw ValidationError("PCA must retain fewer components than its dimension");
  }
  if (ratio_.size() != components_.rows()) throw ShapeError("ratio count != component count");
  components_f_ = components_.cast<float>();
}

Eigen::VectorXd PcaModel::transform(const Eigen::Ref<const Eigen::VectorXd>& f) const {
  if (f.size() != mean_.size()) {
    throw ShapeError("vector length " + std::to_string(f.size()) + " != PCA dim " +
                     std::to_string(mean_.size()));
  }
  return components_ * (f - mean_);
}

Eigen::VectorXd PcaModel::inverse_transform(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  if (s.size() != components_.rows()) {
    throw ShapeError("reduced vector length " + std::to_string(s.size()) +
                     " != n_components " + std::to_string(components_.rows()));
  }
  return components_.transpose() * s + mean_;
}

Eigen::VectorXd PcaModel::reconstruct(const Eigen::Ref<const Eigen::VectorXd>& f) const {
  return inverse_transform(transform(f));
}

void PcaModel::reconstruct(std::span<const float> f, std::span<float> out) const {
  if (f.size() != static_cast<std::size_t>(mean_.size()) || out.size() != f.size()) {
    throw ShapeError("reconstruct: vector length does not match PCA dim");
  }
  const Eigen::Map<const Eigen::VectorXf> in(f.data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXd centered = in.cast<double>() - mean_;
  const Eigen::VectorXd reduced = components_ * centered;
  Eigen::Map<Eigen::VectorXf> dst(out.data(), static_cast<Eigen::Index>(out.size()));
  dst = (components_.transpose() * reduced + mean_).cast<float>();
}

Eigen::MatrixXf PcaModel::reconstruct_batch(const Eigen::Ref<const Eigen::MatrixXf>& x) const {
  if (x.rows() != mean_.size()) throw ShapeError("reconstruct_batch: row count != PCA dim");
  const Eigen::VectorXf mean = mean_.cast<float>();
  const Eigen::MatrixXf reduced = components_f_ * (x.colwise() - mean);
  Eigen::MatrixXf out = components_f_.transpose() * reduced;
  out.colwise() += mean;
  return out;
}

PcaModel fit(const Eigen::MatrixXd& samples, const Retention& retain) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  if (n < 2) throw InsufficientDataError("PCA needs at least 2 samples, got " + std::to_string(n));
  if (dim < 2) throw ValidationError("PCA dimension must be >= 2");
  if (const auto* c = std::get_if<RetainCount>(&retain)) {
    if (c->k < 0 || c->k >= dim) {
      throw ValidationError("cannot retain " + std::to_string(c->k) + " of " +
                            std::to_string(dim) + " dimensions");
    }
  } else {
    const double q = std::get<RetainVariance>(retain).q;
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("variance ratio must lie in (0, 1]");
  }
  if (!samples.allFinite()) throw ValidationError("PCA samples contain non-finite values");

  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  const Decomposition dec = thin_svd(centered);

  const double total_ss = centered.squaredNorm();
  const double s_max = dec.singular.size() > 0 ? dec.singular(0) : 0.0;
  const double tol = s_max * static_cast<double>(std::max(n, dim)) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < dec.singular.size() && dec.singular(rank) > tol) ++rank;

  Eigen::Index k = 0;
  if (const auto* c = std::get_if<RetainCount>(&retain)) {
    k = c->k;
    if (k > rank) {
      throw RankError("data rank " + std::to_string(rank) + " is below the requested " +
                      std::to_string(k) + " components");
    }
  } else {
    const double q = std::get<RetainVariance>(retain).q;
    const Eigen::Index cap = std::min(rank, dim - 1);
    double cumulative = 0.0;
    while (k < cap) {
      cumulative += dec.singular(k) * dec.singular(k) / total_ss;
      ++k;
      if (cumulative >= q - 1e-12) break;
    }
  }

  Eigen::MatrixXd components = dec.right.leftCols(k).transpose();
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    components.row(i).cwiseAbs().maxCoeff(&arg);
    if (components(i, arg) < 0.0) components.row(i) *= -1.0;
  }
  Eigen::VectorXd eigenvalues(k);
  Eigen::VectorXd ratio(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double ss = dec.singular(i) * dec.singular(i);
    eigenvalues(i) = ss / static_cast<double>(n - 1);
    ratio(i) = total_ss > 0.0 ? ss / total_ss : 0.0;
  }
  return PcaModel(mean, std::move(components), std::move(ratio), std::move(eigenvalues));
}

PcaBank::PcaBank(BankMode mode, int channels, int height, int width, std::vector<int> selected,
                 std::vector<PcaModel> models)
    : mode_(mode),
      channels_(channels),
      height_(height),
      width_(width),
      selected_(std::move(selected)),
      models_(std::move(models)) {
  if (channels < 1 || height < 1 || width < 1) throw ShapeError("bank tensor shape must be >= 1");
  const auto plane = static_cast<int>(static_cast<std::size_t>(height) * width);
  if (mode_ == BankMode::Full) {
    if (models_.size() != 1 || !selected_.empty()) {
      throw ValidationError("full bank holds exactly one model and no channel list");
    }
    if (models_[0].dim() != channels * plane) throw ShapeError("full model dim != C*H*W");
  } else {
    if (models_.empty() || models_.size() != selected_.size()) {
      throw ValidationError("per-feature bank needs one model per selected channel");
    }
    std::set<int> seen;
    for (std::size_t i = 0; i < selected_.size(); ++i) {
      const int c = selected_[i];
      if (c < 0 || c >= channels) throw ValidationError("channel index out of range");
      if (!seen.insert(c).second) throw ValidationError("duplicate channel index");
      if (models_[i].dim() != plane) throw ShapeError("per-feature model dim != H*W");
    }
  }
}

void PcaBank::check_shape(const FeatureTensor& f) const {
  if (f.channels() != channels_ || f.height() != height_ || f.width() != width_) {
    throw ShapeError("tensor shape does not match the bank");
  }
}

std::span<const float> PcaBank::model_input(const FeatureTensor& f, std::size_t i) const {
  check_shape(f);
  if (i >= models_.size()) throw ValidationError("model index out of range");
  if (mode_ == BankMode::Full) return f.data();
  return f.channel(selected_[i]);
}

FeatureTensor PcaBank::roundtrip(const FeatureTensor& f, std::size_t i) const {
  const auto in = model_input(f, i);
  FeatureTensor out = f;
  const auto dst = mode_ == BankMode::Full ? out.data() : out.channel(selected_[i]);
  models_[i].reconstruct(in, dst);
  return out;
}

std::string PcaBank::model_label(std::size_t i) const {
  if (mode_ == BankMode::Full) return "full";
  return "ch" + std::to_string(selected_.at(i));
}

PcaBank fit_bank(std::span<const FeatureTensor> tensors, BankMode mode, const Retention& retain,
                 std::vector<int> channels, unsigned threads) {
  if (tensors.size() < 2) throw InsufficientDataError("fit_bank needs at least 2 tensors");
  const FeatureTensor& first = tensors.front();
  for (const auto& t : tensors) {
    if (!t.same_shape(first)) throw ShapeError("tensors passed to fit_bank differ in shape");
  }
  const auto n = static_cast<Eigen::Index>(tensors.size());
  if (mode == BankMode::Full) {
    if (!channels.empty()) throw ValidationError("full mode takes no channel list");
    const auto dim = static_cast<Eigen::Index>(first.size());
    Eigen::MatrixXd samples(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto d = tensors[static_cast<std::size_t>(r)].data();
      samples.row(r) = Eigen::Map<const Eigen::RowVectorXf>(d.data(), dim).cast<double>();
    }
    std::vector<PcaModel> models;
    models.push_back(fit(samples, retain));
    return PcaBank(mode, first.channels(), first.height(), first.width(), {}, std::move(models));
  }

  if (channels.empty()) {
    channels.resize(static_cast<std::size_t>(first.channels()));
    for (int c = 0; c < first.channels(); ++c) channels[static_cast<std::size_t>(c)] = c;
  }
  std::set<int> seen;
  for (int c : channels) {
    if (c < 0 || c >= first.channels()) throw ValidationError("channel index out of range");
    if (!seen.insert(c).second) throw ValidationError("duplicate channel index");
  }
  const auto plane = static_cast<Eigen::Index>(first.plane_size());
  std::vector<std::optional<PcaModel>> fitted(channels.size());
  parallel_for(
      channels.size(),
      [&](std::size_t i) {
        Eigen::MatrixXd samples(n, plane);
        for (Eigen::Index r = 0; r < n; ++r) {
          const auto d = tensors[static_cast<std::size_t>(r)].channel(channels[i]);
          samples.row(r) = Eigen::Map<const Eigen::RowVectorXf>(d.data(), plane).cast<double>();
        }
        fitted[i].emplace(fit(samples, retain));
      },
      threads);
  std::vector<PcaModel> models;
  models.reserve(fitted.size());
  for (auto& m : fitted) models.push_back(std::move(*m));
  return PcaBank(mode, first.channels(), first.height(), first.width(), std::move(channels),
                 std::move(models));
}

std::vector<std::uint8_t> serialize_bank(const PcaBank& bank) {
  io::Writer w;
  w.bytes(kBankMagic);
  w.u8(kBankVersion);
  w.u8(bank.mode() == BankMode::Full ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(bank.channels()));
  w.u32(static_cast<std::uint32_t>(bank.height()));
  w.u32(static_cast<std::uint32_t>(bank.width()));
  w.u32(static_cast<std::uint32_t>(bank.size()));
  for (int c : bank.selected()) w.u32(static_cast<std::uint32_t>(c));
  for (const PcaModel& m : bank.models()) {
    w.u32(static_cast<std::uint32_t>(m.dim()));
    w.u32(static_cast<std::uint32_t>(m.n_components()));
    w.f32s_from(std::span<const double>(m.mean().data(), static_cast<std::size_t>(m.dim())));
    // Row-major components.
    for (int r = 0; r < m.n_components(); ++r) {
      for (int c = 0; c < m.dim(); ++c) w.f32(static_cast<float>(m.components()(r, c)));
    }
    w.f32s_from(std::span<const double>(m.explained_variance_ratio().data(),
                                        static_cast<std::size_t>(m.n_components())));
  }
  return w.take();
}

PcaBank parse_bank(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes, "PCA bank");
  r.expect_magic(kBankMagic);
  if (const auto v = r.u8(); v != kBankVersion) {
    throw FormatError("PCA bank: unsupported version " + std::to_string(v));
  }
  const auto tag = r.u8();
  if (tag > 1) throw FormatError("PCA bank: unknown mode tag");
  const BankMode mode = tag == 0 ? BankMode::Full : BankMode::PerFeature;
  const auto channels = r.u32();
  const auto height = r.u32();
  const auto width = r.u32();
  const auto count = r.u32();
  if (channels == 0 || height == 0 || width == 0 || channels > 1u << 16 || height > 1u << 12 ||
      width > 1u << 12 || count == 0 || count > channels) {
    throw FormatError("PCA bank: implausible header");
  }
  std::vector<int> selected;
  if (mode == BankMode::PerFeature) {
    for (std::uint32_t i = 0; i < count; ++i) selected.push_back(static_cast<int>(r.u32()));
  }
  std::vector<PcaModel> models;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto dim = r.u32();
    const auto k = r.u32();
    if (dim < 2 || k >= dim) throw FormatError("PCA bank: invalid model dimensions");
    const auto mean = r.f32s(dim);
    const auto comps = r.f32s(std::size_t{k} * dim);
    const auto ratio = r.f32s(k);
    Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXf>(mean.data(), dim).cast<double>();
    using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::MatrixXd v = Eigen::Map<const RowMajor>(comps.data(), k, dim).cast<double>();
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXf>(ratio.data(), k).cast<double>();
    if (!m.allFinite() || !v.allFinite() || !q.allFinite()) {
      throw ValidationError("PCA bank contains non-finite values");
    }
    models.emplace_back(std::move(m), std::move(v), std::move(q));
  }
  r.expect_end();
  return PcaBank(mode, static_cast<int>(channels), static_cast<int>(height),
                 static_cast<int>(width), std::move(selected), std::move(models));
}

void save_bank(const std::filesystem::path& path, const PcaBank& bank) {
  io::write_file(path, serialize_bank(bank));
}

PcaBank load_bank(const std::filesystem::path& path) { return parse_bank(io::read_file(path)); }

}  // namespace tmon
