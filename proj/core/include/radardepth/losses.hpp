#pragma once

#include "radardepth/geometry.hpp"
#include "radardepth/sid.hpp"

#include <vector>

namespace radardepth {

/// K×H×W per-pixel ordinal probabilities, stored channel-major
/// (index = (k·H + v)·W + u). Every entry is clamped to [ε, 1 − ε].
class ProbabilityVolume {
 public:
  static constexpr double kEpsilon = 1e-7;

  ProbabilityVolume() = default;
  ProbabilityVolume(int bins, int width, int height, double fill = 0.5);
  /// Clamps `values` into [ε, 1 − ε]; throws on NaN or a size mismatch.
  ProbabilityVolume(int bins, int width, int height, std::vector<double> values);

  int bins() const { return bins_; }
  int width() const { return width_; }
  int height() const { return height_; }

  double at(int k, int u, int v) const { return values_[index(k, u, v)]; }
  void set(int k, int u, int v, double p);
  const std::vector<double>& values() const { return values_; }

  std::size_t index(int k, int u, int v) const {
    return (static_cast<std::size_t>(k) * height_ + static_cast<std::size_t>(v)) * width_ +
           static_cast<std::size_t>(u);
  }

  static double clamp(double p);

 private:
  int bins_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Loss value and its gradient laid out like the differentiated input.
struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Divisor for both losses: the number of supervised pixels (default) or W·H.
enum class LossNormalization { kValidPixels, kAllPixels };

/// Mean absolute error over valid target pixels; subgradient sign(0) = 0.
/// Throws std::invalid_argument on shape mismatch or an empty target.
LossResult l1_loss(const DenseDepthImage& pred, const SparseDepthImage& target,
                   LossNormalization norm = LossNormalization::kValidPixels);

/// −(1/M) Σ_valid [Σ_{k<l} log P^k + Σ_{k≥l} log(1 − P^k)].
/// Throws std::invalid_argument on shape mismatch or no valid labels.
LossResult ordinal_loss(const ProbabilityVolume& probs, const OrdinalLabelMap& labels,
                        LossNormalization norm = LossNormalization::kValidPixels);

}  // namespace radardepth
