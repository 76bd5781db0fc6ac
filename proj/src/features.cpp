#include "tmon/features.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "tmon/error.hpp"
#include "tmon/rng.hpp"

namespace tmon {

namespace {

constexpr std::string_view kWeightsMagic = "FBNK1";
constexpr std::uint8_t kWeightsVersion = 1;

int conv_out(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }
int pool_out(int in) { return (in + 2 - 3) / 2 + 1; }

void normalize_filter(std::span<float> w) {
  double mean = 0.0;
  for (float v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double norm = 0.0;
  for (float& v : w) {
    v = static_cast<float>(v - mean);
    norm += static_cast<double>(v) * v;
  }
  norm = std::sqrt(norm);
  for (float& v : w) v = static_cast<float>(v / norm);
}

}  // namespace

int FilterBank::output_side(int input_side) const noexcept {
  int s = conv_out(input_side, static_cast<int>(kernel_h), static_cast<int>(conv_stride),
                   static_cast<int>(padding));
  for (std::uint32_t i = 0; i < pool_stages; ++i) s = pool_out(s);
  return s;
}

void FilterBank::validate() const {
  if (filters < 1) throw ValidationError("filter bank needs at least one filter");
  if (in_channels < 1 || in_channels > 4) throw ValidationError("in_channels must be 1..4");
  if (kernel_h < 1 || kernel_w < 1 || conv_stride < 1) {
    throw ValidationError("kernel size and stride must be >= 1");
  }
  if (pool_stages > 8) throw ValidationError("pool_stages must be <= 8");
  if (weights.size() != filters * kernel_size()) throw ValidationError("weight count mismatch");
  if (scale.size() != filters || bias.size() != filters) {
    throw ValidationError("scale/bias count mismatch");
  }
  auto finite = [](const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
  };
  if (!finite(weights) || !finite(scale) || !finite(bias)) {
    throw ValidationError("filter bank contains non-finite values");
  }
}

std::uint64_t FilterBank::hash() const noexcept {
  const auto bytes = serialize_weights(*this);
  return io::fnv1a(bytes);
}

FeatureTensor::FeatureTensor(int channels, int height, int width, std::uint64_t provenance)
    : FeatureTensor(channels, height, width,
                    std::vector<float>(static_cast<std::size_t>(std::max(channels, 0)) *
                                       std::max(height, 0) * std::max(width, 0)),
                    provenance) {}

FeatureTensor::FeatureTensor(int channels, int height, int width, std::vector<float> data,
                             std::uint64_t provenance)
    : channels_(channels),
      height_(height),
      width_(width),
      data_(std::move(data)),
      provenance_(provenance) {
  if (channels < 1 || height < 1 || width < 1) throw ShapeError("tensor dimensions must be >= 1");
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw ShapeError("tensor data size does not match C x H x W");
  }
}

std::vector<std::uint8_t> serialize_weights(const FilterBank& bank) {
  io::Writer w;
  w.bytes(kWeightsMagic);
  w.u8(kWeightsVersion);
  for (std::uint32_t v : {bank.filters, bank.in_channels, bank.kernel_h, bank.kernel_w,
                          bank.conv_stride, bank.padding, bank.pool_stages}) {
    w.u32(v);
  }
  w.f32s(bank.weights);
  w.f32s(bank.scale);
  w.f32s(bank.bias);
  return w.take();
}

FilterBank parse_weights(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes, "filter bank");
  r.expect_magic(kWeightsMagic);
  if (const auto version = r.u8(); version != kWeightsVersion) {
    throw FormatError("filter bank: unsupported version " + std::to_string(version));
  }
  FilterBank bank;
  bank.filters = r.u32();
  bank.in_channels = r.u32();
  bank.kernel_h = r.u32();
  bank.kernel_w = r.u32();
  bank.conv_stride = r.u32();
  bank.padding = r.u32();
  bank.pool_stages = r.u32();
  // Guard the size arithmetic before allocating.
  if (bank.filters == 0 || bank.in_channels == 0 || bank.kernel_h == 0 || bank.kernel_w == 0 ||
      bank.in_channels > 4 || bank.kernel_h > 64 || bank.kernel_w > 64 || bank.filters > 65536) {
    throw FormatError("filter bank: implausible header");
  }
  bank.weights = r.f32s(std::size_t{bank.filters} * bank.kernel_size());
  bank.scale = r.f32s(bank.filters);
  bank.bias = r.f32s(bank.filters);
  r.expect_end();
  bank.validate();
  return bank;
}

FilterBank load_weights(const std::filesystem::path& path) {
  return parse_weights(io::read_file(path));
}

void save_weights(const std::filesystem::path& path, const FilterBank& bank) {
  bank.validate();
  io::write_file(path, serialize_weights(bank));
}

FilterBank builtin_bank(std::uint64_t seed) {
  FilterBank bank;
  constexpr int kSide = 7;
  constexpr int kHalf = kSide / 2;
  const std::size_t ksize = bank.kernel_size();
  bank.weights.assign(bank.filters * ksize, 0.0f);
  bank.scale.assign(bank.filters, kBuiltinScale);
  bank.bias.assign(bank.filters, 0.0f);

  constexpr std::array<std::array<float, 3>, 2> kColors = {{{1.0f, 1.0f, 1.0f},
                                                            {1.0f, -1.0f, 0.0f}}};
  constexpr std::array<double, 2> kSigmas = {1.2, 2.2};
  std::size_t k = 0;
  for (double sigma : kSigmas) {
    for (const auto& color : kColors) {
      for (int kind = 0; kind < 2; ++kind) {
        for (int o = 0; o < 4; ++o) {
          const double theta = o * std::numbers::pi / 4.0;
          const double c = std::cos(theta);
          const double s = std::sin(theta);
          auto w = std::span(bank.weights).subspan(k * ksize, ksize);
          for (int y = -kHalf; y <= kHalf; ++y) {
            for (int x = -kHalf; x <= kHalf; ++x) {
              const double across = x * c + y * s;   // distance across the edge
              const double along = -x * s + y * c;   // position along the edge
              const double envelope = std::exp(-(across * across) / (2 * sigma * sigma) -
                                               (along * along) / (2 * 4 * sigma * sigma));
              const double profile =
                  kind == 0 ? across / sigma : 1.0 - (across * across) / (sigma * sigma);
              const double v = envelope * profile;
              for (int ch = 0; ch < 3; ++ch) {
                w[static_cast<std::size_t>(ch) * kSide * kSide + (y + kHalf) * kSide + x + kHalf] =
                    static_cast<float>(v * color[static_cast<std::size_t>(ch)]);
              }
            }
          }
          normalize_filter(w);
          ++k;
        }
      }
    }
  }
  const Rng rng(seed);
  for (std::size_t i = 0; k < bank.filters; ++k, ++i) {
    Rng filter_rng = rng.split(i);
    auto w = std::span(bank.weights).subspan(k * ksize, ksize);
    for (float& v : w) v = static_cast<float>(filter_rng.normal());
    normalize_filter(w);
  }
  return bank;
}

std::uint64_t extractor_hash(const FilterBank& bank, const Normalization& norm) noexcept {
  std::uint64_t h = bank.hash();
  const auto* p = reinterpret_cast<const std::uint8_t*>(&norm);
  return io::fnv1a(std::span(p, sizeof norm), h);
}

namespace {

void check_input(const Image& image, const FilterBank& bank) {
  const int side = image.width();
  if (image.height() != side) throw ShapeError("extractor input must be square");
  if (side % bank.reduction() != 0) {
    throw ShapeError("input side " + std::to_string(side) + " is not a multiple of " +
                     std::to_string(bank.reduction()));
  }
  if (conv_out(side, static_cast<int>(bank.kernel_h), static_cast<int>(bank.conv_stride),
               static_cast<int>(bank.padding)) < 1) {
    throw ShapeError("input too small for the kernel");
  }
}

// Raw convolution responses, position-major: the filters of one output
// position are contiguous.
std::vector<float> convolve(const Image& image, const FilterBank& bank, const Normalization& norm) {
  const int side = image.width();
  const int channels = static_cast<int>(bank.in_channels);
  const int kh = static_cast<int>(bank.kernel_h);
  const int kw = static_cast<int>(bank.kernel_w);
  const int pad = static_cast<int>(bank.padding);
  const int stride = static_cast<int>(bank.conv_stride);
  const int oh = conv_out(side, kh, stride, pad);
  const int ow = conv_out(side, kw, stride, pad);

  // Normalized, zero-padded input planes.
  const int ph = side + 2 * pad;
  const int pw = side + 2 * pad;
  std::vector<float> planes(static_cast<std::size_t>(channels) * ph * pw, 0.0f);
  for (int c = 0; c < channels; ++c) {
    const float inv = 1.0f / norm.stddev[static_cast<std::size_t>(c)];
    const float mean = norm.mean[static_cast<std::size_t>(c)];
    float* plane = planes.data() + static_cast<std::size_t>(c) * ph * pw;
    for (int y = 0; y < side; ++y) {
      const std::uint8_t* row = image.px(0, y);
      float* dst = plane + static_cast<std::size_t>(y + pad) * pw + pad;
      for (int x = 0; x < side; ++x) dst[x] = (row[4 * x + c] / 255.0f - mean) * inv;
    }
  }

  // im2col: one column per output position, laid out like the kernels.
  const auto ksize = static_cast<Eigen::Index>(bank.kernel_size());
  const Eigen::Index positions = static_cast<Eigen::Index>(oh) * ow;
  Eigen::MatrixXf patches(ksize, positions);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      float* col = patches.col(static_cast<Eigen::Index>(y) * ow + x).data();
      for (int c = 0; c < channels; ++c) {
        const float* plane = planes.data() + static_cast<std::size_t>(c) * ph * pw;
        for (int ky = 0; ky < kh; ++ky) {
          const float* src = plane + static_cast<std::size_t>(y * stride + ky) * pw + x * stride;
          std::copy_n(src, kw, col);
          col += kw;
        }
      }
    }
  }
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> kernels(bank.weights.data(), bank.filters, ksize);

  std::vector<float> conv(static_cast<std::size_t>(positions) * bank.filters);
  Eigen::Map<Eigen::MatrixXf> out(conv.data(), bank.filters, positions);
  out.noalias() = kernels * patches;
  return conv;
}

// 3x3 stride-2 max-pool, padding 1, on position-major data.
std::vector<float> max_pool_pm(const std::vector<float>& in, std::size_t filters, int h, int w,
                               int& oh, int& ow) {
  oh = pool_out(h);
  ow = pool_out(w);
  std::vector<float> out(filters * static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow),
                         -std::numeric_limits<float>::infinity());
  for (int y = 0; y < oh; ++y) {
    const int y0 = std::max(0, 2 * y - 1);
    const int y1 = std::min(h, 2 * y + 2);
    for (int x = 0; x < ow; ++x) {
      const int x0 = std::max(0, 2 * x - 1);
      const int x1 = std::min(w, 2 * x + 2);
      float* __restrict dst = out.data() + (static_cast<std::size_t>(y) * ow + x) * filters;
      for (int yy = y0; yy < y1; ++yy) {
        for (int xx = x0; xx < x1; ++xx) {
          const float* __restrict src = in.data() + (static_cast<std::size_t>(yy) * w + xx) * filters;
          for (std::size_t k = 0; k < filters; ++k) dst[k] = std::max(dst[k], src[k]);
        }
      }
    }
  }
  return out;
}

// Affine + ReLU on position-major responses, the pool stages, then the
// transpose to channel-major planes.
FeatureTensor finish(std::vector<float> conv, int oh, int ow, const FilterBank& bank,
                     const Normalization& norm) {
  const std::size_t filters = bank.filters;
  const auto positions = static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow);
  const float* __restrict scale = bank.scale.data();
  const float* __restrict bias = bank.bias.data();
  for (std::size_t p = 0; p < positions; ++p) {
    float* __restrict v = conv.data() + p * filters;
    for (std::size_t k = 0; k < filters; ++k) v[k] = std::max(0.0f, v[k] * scale[k] + bias[k]);
  }
  int h = oh;
  int w = ow;
  for (std::uint32_t i = 0; i < bank.pool_stages; ++i) {
    int nh = 0;
    int nw = 0;
    conv = max_pool_pm(conv, filters, h, w, nh, nw);
    h = nh;
    w = nw;
  }
  const auto plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<float> data(conv.size());
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t k = 0; k < filters; ++k) data[k * plane + p] = conv[p * filters + k];
  }
  return FeatureTensor(static_cast<int>(bank.filters), h, w, std::move(data),
                       extractor_hash(bank, norm));
}

int conv_side(const FilterBank& bank, int side) {
  return conv_out(side, static_cast<int>(bank.kernel_h), static_cast<int>(bank.conv_stride),
                  static_cast<int>(bank.padding));
}

}  // namespace

FeatureTensor extract(const Image& image, const FilterBank& bank, const Normalization& norm) {
  check_input(image, bank);
  const int o = conv_side(bank, image.width());
  return finish(convolve(image, bank, norm), o, o, bank, norm);
}

DeltaExtractor::DeltaExtractor(FilterBank bank, Image base, Normalization norm)
    : bank_(std::move(bank)), norm_(norm), base_(std::move(base)) {
  bank_.validate();
  check_input(base_, bank_);
  side_ = base_.width();
  out_side_ = conv_side(bank_, side_);
  const std::size_t filters = bank_.filters;
  base_pre_ = convolve(base_, bank_, norm_);
  // Kernel taps as [c][ky][kx][k].
  const std::size_t taps = bank_.kernel_size();
  taps_.resize(taps * filters);
  for (std::size_t k = 0; k < filters; ++k) {
    for (std::size_t t = 0; t < taps; ++t) taps_[t * filters + k] = bank_.weights[k * taps + t];
  }
}

FeatureTensor DeltaExtractor::operator()(const Image& input) const {
  if (input.width() != side_ || input.height() != side_) {
    throw ShapeError("delta extractor input does not match its base image");
  }
  const int channels = static_cast<int>(bank_.in_channels);
  const int kh = static_cast<int>(bank_.kernel_h);
  const int kw = static_cast<int>(bank_.kernel_w);
  const int pad = static_cast<int>(bank_.padding);
  const int stride = static_cast<int>(bank_.conv_stride);
  const std::size_t filters = bank_.filters;

  std::vector<int> changed;
  for (int i = 0, n = side_ * side_; i < n; ++i) {
    const std::uint8_t* a = input.bytes().data() + 4 * static_cast<std::size_t>(i);
    const std::uint8_t* b = base_.bytes().data() + 4 * static_cast<std::size_t>(i);
    for (int c = 0; c < channels; ++c) {
      if (a[c] != b[c]) {
        changed.push_back(i);
        break;
      }
    }
  }
  // Past this point a dense pass is cheaper.
  if (changed.size() * 5 > static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_)) {
    return extract(input, bank_, norm_);
  }

  std::vector<float> pre = base_pre_;
  std::array<float, 4> inv{};
  for (int c = 0; c < channels; ++c) inv[static_cast<std::size_t>(c)] = 1.0f / (255.0f * norm_.stddev[static_cast<std::size_t>(c)]);
  for (int i : changed) {
    const int qx = i % side_ + pad;
    const int qy = i / side_ + pad;
    const std::uint8_t* a = input.bytes().data() + 4 * static_cast<std::size_t>(i);
    const std::uint8_t* b = base_.bytes().data() + 4 * static_cast<std::size_t>(i);
    std::array<float, 4> d{};
    for (int c = 0; c < channels; ++c) {
      d[static_cast<std::size_t>(c)] = static_cast<float>(int{a[c]} - int{b[c]}) * inv[static_cast<std::size_t>(c)];
    }
    // Outputs o with o*stride <= q < o*stride + kernel.
    const int oy0 = std::max(0, (qy - kh + stride) / stride);
    const int oy1 = std::min(out_side_ - 1, qy / stride);
    const int ox0 = std::max(0, (qx - kw + stride) / stride);
    const int ox1 = std::min(out_side_ - 1, qx / stride);
    for (int oy = oy0; oy <= oy1; ++oy) {
      const int ky = qy - oy * stride;
      for (int ox = ox0; ox <= ox1; ++ox) {
        const int kx = qx - ox * stride;
        float* __restrict acc = pre.data() + (static_cast<std::size_t>(oy) * out_side_ + ox) * filters;
        for (int c = 0; c < channels; ++c) {
          const float dc = d[static_cast<std::size_t>(c)];
          const float* __restrict w = taps_.data() +
                           ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * filters;
          for (std::size_t k = 0; k < filters; ++k) acc[k] += dc * w[k];
        }
      }
    }
  }
  return finish(std::move(pre), out_side_, out_side_, bank_, norm_);
}

}  // namespace tmon
