#pragma once

// Seeded generators and brute-force reference implementations shared by the
// unit tests and the acceptance binary. Nothing here calls into the library
// code it is used to check.

#include "radardepth/geometry.hpp"
#include "radardepth/losses.hpp"
#include "radardepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// Sparse depth map with each pixel valid with probability `density`;
/// at least one pixel is forced valid.
inline radardepth::SparseDepthImage random_sparse(Rng& rng, int w, int h, double density,
                                                  double lo, double hi) {
  radardepth::SparseDepthImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (coin(rng, density)) img.set(u, v, uniform(rng, lo, hi));
  if (img.valid_count() == 0) img.set(uniform_int(rng, 0, w - 1), uniform_int(rng, 0, h - 1),
                                      uniform(rng, lo, hi));
  return img;
}

inline radardepth::DenseDepthImage random_dense(Rng& rng, int w, int h, double lo, double hi) {
  radardepth::DenseDepthImage img(w, h, 1.0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) img.set(u, v, uniform(rng, lo, hi));
  return img;
}

// ---------------------------------------------------------------------------
// Losses

inline double l1_value(const radardepth::DenseDepthImage& pred,
                       const radardepth::SparseDepthImage& target) {
  double sum = 0.0;
  int m = 0;
  for (int v = 0; v < target.height(); ++v)
    for (int u = 0; u < target.width(); ++u) {
      double t = target.at(u, v);
      if (t > 0.0) {
        sum += std::abs(pred.at(u, v) - t);
        ++m;
      }
    }
  return sum / m;
}

/// Per-pixel sum of binary log-likelihoods, straight from the definition.
inline double ordinal_value(const radardepth::ProbabilityVolume& p,
                            const radardepth::OrdinalLabelMap& labels) {
  double sum = 0.0;
  int m = 0;
  for (int v = 0; v < labels.height(); ++v)
    for (int u = 0; u < labels.width(); ++u) {
      if (!labels.valid(u, v)) continue;
      int l = labels.label(u, v);
      double pix = 0.0;
      for (int k = 0; k < p.bins(); ++k)
        pix += k < l ? std::log(p.at(k, u, v)) : std::log(1.0 - p.at(k, u, v));
      sum += pix;
      ++m;
    }
  return -sum / m;
}

/// Central difference of f at x[i]; x is restored afterwards.
inline double central_difference(const std::function<double()>& f, double& xi, double h = 1e-6) {
  const double saved = xi;
  xi = saved + h;
  double fp = f();
  xi = saved - h;
  double fm = f();
  xi = saved;
  return (fp - fm) / (2.0 * h);
}

/// Rounding bound of a central difference: each side of the quotient
/// carries error of about ε·magnitude, where magnitude is the absolute sum
/// of the terms making up f, and the quotient divides by 2h.
inline double fd_noise(double magnitude, double h = 1e-6) {
  return std::numeric_limits<double>::epsilon() * magnitude / h;
}

/// Relative disagreement between an analytic and a numeric derivative;
/// differences within the central-difference rounding bound count as zero.
inline double gradient_error(double analytic, double numeric, double noise) {
  double diff = std::abs(analytic - numeric);
  if (diff <= noise) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

// ---------------------------------------------------------------------------
// Metrics

struct NaiveMetrics {
  double delta[3] = {0, 0, 0};
  double rmse = 0;
  double absrel_pred = 0;
  double absrel_target = 0;
  std::size_t count = 0;
};

inline NaiveMetrics naive_metrics(const radardepth::DenseDepthImage& pred,
                                  const radardepth::SparseDepthImage& target, double cap) {
  NaiveMetrics m;
  std::vector<double> ratios;
  double sq = 0.0;
  for (int v = 0; v < target.height(); ++v)
    for (int u = 0; u < target.width(); ++u) {
      double t = target.at(u, v);
      if (!(t > 0.0 && t <= cap)) continue;
      double p = pred.at(u, v);
      ratios.push_back(std::max(p / t, t / p));
      sq += (p - t) * (p - t);
      m.absrel_pred += std::abs(p - t) / p;
      m.absrel_target += std::abs(p - t) / t;
    }
  m.count = ratios.size();
  if (m.count == 0) return m;
  for (int n = 0; n < 3; ++n) {
    double thr = std::pow(1.25, n + 1);
    m.delta[n] = static_cast<double>(std::count_if(ratios.begin(), ratios.end(),
                                                   [&](double r) { return r < thr; })) /
                 m.count;
  }
  m.rmse = std::sqrt(sq / m.count);
  m.absrel_pred /= m.count;
  m.absrel_target /= m.count;
  return m;
}

// ---------------------------------------------------------------------------
// Linear algebra

/// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) throw std::runtime_error("singular matrix");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Colorization energy written out densely: non-anchored pixels contribute
/// (d_r − Σ w_rs d_s)², anchors contribute λ (d_r − a_r)². Weights follow
/// the 8-neighbourhood Gaussian affinity with a local-variance bandwidth.
/// Returns the minimiser via the normal equations.
inline std::vector<double> dense_colorization(const radardepth::Grid& gray,
                                              const radardepth::SparseDepthImage& anchors,
                                              double lambda) {
  const int w = gray.width();
  const int h = gray.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  // Residual rows r_i(d) = Σ_j c_ij d_j − e_i; energy Σ_i s_i r_i².
  std::vector<std::vector<double>> ata(n, std::vector<double>(n, 0.0));
  std::vector<double> atb(n, 0.0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      std::size_t i = static_cast<std::size_t>(v) * w + u;
      std::vector<double> row(n, 0.0);
      double e = 0.0;
      double s = 1.0;
      if (anchors.valid(u, v)) {
        row[i] = 1.0;
        e = anchors.at(u, v);
        s = lambda;
      } else {
        std::vector<double> vals{gray.at(u, v)};
        std::vector<std::size_t> idx;
        std::vector<double> nb;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du) {
            if (du == 0 && dv == 0) continue;
            int uu = u + du, vv = v + dv;
            if (uu < 0 || vv < 0 || uu >= w || vv >= h) continue;
            idx.push_back(static_cast<std::size_t>(vv) * w + uu);
            nb.push_back(gray.at(uu, vv));
            vals.push_back(gray.at(uu, vv));
          }
        double mean = 0.0;
        for (double x : vals) mean += x;
        mean /= vals.size();
        double var = 0.0;
        for (double x : vals) var += (x - mean) * (x - mean);
        var = std::max(var / vals.size(), 1e-4);
        std::vector<double> wt(nb.size());
        double total = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k) {
          double d = gray.at(u, v) - nb[k];
          wt[k] = std::exp(-d * d / (2.0 * var));
          total += wt[k];
        }
        row[i] = 1.0;
        for (std::size_t k = 0; k < nb.size(); ++k) row[idx[k]] -= wt[k] / total;
      }
      for (std::size_t a = 0; a < n; ++a) {
        if (row[a] == 0.0) continue;
        atb[a] += s * row[a] * e;
        for (std::size_t b = 0; b < n; ++b) ata[a][b] += s * row[a] * row[b];
      }
    }
  return gauss_solve(std::move(ata), std::move(atb));
}

}  // namespace oracle
