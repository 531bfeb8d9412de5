#pragma once

#include "radardepth/geometry.hpp"

#include <cstdint>
#include <vector>

namespace radardepth {

class ProbabilityVolume;

/// Spacing-increasing (log-uniform) discretisation of [alpha, beta] into K bins.
class SidConfig {
 public:
  /// Throws std::invalid_argument unless 0 < alpha < beta and bins >= 2.
  SidConfig(double alpha = 1.0, double beta = 80.0, int bins = 80);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  int bins() const { return bins_; }

 private:
  double alpha_;
  double beta_;
  int bins_;
};

/// t_i = exp(log α + i (log β − log α) / K) for i = 0..K, with t_0 = α and
/// t_K = β exactly.
std::vector<double> sid_thresholds(const SidConfig& cfg);

/// Largest i with t_i <= d, clamped to [0, K−1]. Throws on d <= 0.
int encode_depth(double depth, const SidConfig& cfg);

/// Geometric bin midpoint sqrt(t_i t_{i+1}). Throws on i outside [0, K).
double decode_bin(int bin, const SidConfig& cfg);

/// Per-pixel integer labels with a validity mask.
class OrdinalLabelMap {
 public:
  OrdinalLabelMap() = default;
  OrdinalLabelMap(int width, int height, int bins);

  int width() const { return width_; }
  int height() const { return height_; }
  int bins() const { return bins_; }

  bool valid(int u, int v) const { return mask_[idx(u, v)] != 0; }
  int label(int u, int v) const { return labels_[idx(u, v)]; }
  /// Throws std::invalid_argument unless 0 <= label < bins.
  void set(int u, int v, int label);
  void clear(int u, int v) { mask_[idx(u, v)] = 0; labels_[idx(u, v)] = 0; }
  std::size_t valid_count() const;

 private:
  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width_ + u; }

  int width_ = 0;
  int height_ = 0;
  int bins_ = 0;
  std::vector<int> labels_;
  std::vector<std::uint8_t> mask_;
};

/// Labels for every valid pixel of a sparse depth target.
OrdinalLabelMap encode_depth_map(const SparseDepthImage& depth, const SidConfig& cfg);

/// label = #{k : P^k >= 0.5}, clamped to K−1; every pixel is valid.
OrdinalLabelMap probs_to_labels(const ProbabilityVolume& probs);

/// decode_bin applied to every pixel; the result is dense because labels
/// from probs_to_labels cover the whole image.
DenseDepthImage decode_label_map(const OrdinalLabelMap& labels, const SidConfig& cfg);

}  // namespace radardepth
