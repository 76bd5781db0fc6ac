#pragma once

// Independent reference implementations used by the tests. They share no
// code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "tmon/features.hpp"
#include "tmon/imaging.hpp"
#include "tmon/scoring.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as rows), sorted by descending eigenvalue.
inline std::pair<std::vector<double>, Matrix> jacobi_eigen(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });
  std::vector<double> vals;
  Matrix vecs;
  for (std::size_t i : order) {
    vals.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    vecs.push_back(col);
  }
  return {vals, vecs};
}

/// Sample covariance (1/(N-1)) of the rows of x.
inline Matrix covariance(const Matrix& x) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : x)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
  Matrix c(d, std::vector<double>(d, 0.0));
  for (const auto& r : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
  for (auto& row : c)
    for (double& v : row) v /= static_cast<double>(n - 1);
  return c;
}

/// Direct convolution, affine, ReLU and 3x3/2 max-pools with padding 1.
inline tmon::FeatureTensor conv_features(const tmon::Image& img, const tmon::FilterBank& b,
                                         const tmon::Normalization& norm = {}) {
  const int side = img.width();
  const int kh = static_cast<int>(b.kernel_h);
  const int kw = static_cast<int>(b.kernel_w);
  const int pad = static_cast<int>(b.padding);
  const int st = static_cast<int>(b.conv_stride);
  const int oh = (side + 2 * pad - kh) / st + 1;
  const int K = static_cast<int>(b.filters);
  std::vector<std::vector<double>> maps(K, std::vector<double>(oh * oh));
  for (int k = 0; k < K; ++k) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < oh; ++ox) {
        double acc = 0.0;
        for (int c = 0; c < static_cast<int>(b.in_channels); ++c) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int y = oy * st + ky - pad;
              const int x = ox * st + kx - pad;
              if (y < 0 || x < 0 || y >= side || x >= side) continue;
              const double v = (img.at(x, y).r * (c == 0) + img.at(x, y).g * (c == 1) +
                                img.at(x, y).b * (c == 2) + img.at(x, y).a * (c == 3)) /
                                   255.0;
              const double nv = (v - norm.mean[c]) / norm.stddev[c];
              acc += nv * b.weights[((k * b.in_channels + c) * kh + ky) * kw + kx];
            }
          }
        }
        maps[k][oy * oh + ox] = std::max(0.0, acc * b.scale[k] + b.bias[k]);
      }
    }
  }
  int h = oh;
  for (std::uint32_t s = 0; s < b.pool_stages; ++s) {
    const int nh = (h + 2 - 3) / 2 + 1;
    for (int k = 0; k < K; ++k) {
      std::vector<double> out(nh * nh, -1e300);
      for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nh; ++x)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = 2 * y + dy;
              const int xx = 2 * x + dx;
              if (yy < 0 || xx < 0 || yy >= h || xx >= h) continue;
              out[y * nh + x] = std::max(out[y * nh + x], maps[k][yy * h + xx]);
            }
      maps[k] = out;
    }
    h = nh;
  }
  std::vector<float> data;
  for (int k = 0; k < K; ++k)
    for (double v : maps[k]) data.push_back(static_cast<float>(v));
  return tmon::FeatureTensor(K, h, h, data);
}

inline std::vector<double> anomaly_cells(const tmon::FeatureTensor& f, const tmon::FeatureTensor& r) {
  std::vector<double> cells(static_cast<std::size_t>(f.height() * f.width()), 0.0);
  for (int c = 0; c < f.channels(); ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        const double d = static_cast<double>(r.at(c, y, x)) - static_cast<double>(f.at(c, y, x));
        cells[y * f.width() + x] += d * d;
      }
  return cells;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace oracle
