#pragma once

#include "radardepth/geometry.hpp"

#include <cstddef>

namespace radardepth {

/// Which depth divides |pred − target| in AbsRel. kPrediction reproduces
/// the evaluation formula as published; kTarget is the usual convention.
enum class AbsRelConvention { kPrediction, kTarget };

struct MetricsReport {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  double rmse = 0.0;
  double absrel = 0.0;         // per the requested convention
  double absrel_pred = 0.0;   // denominator = prediction
  double absrel_target = 0.0;  // denominator = target
  double mae = 0.0;
  std::size_t valid_pixel_count = 0;
  double cap = 0.0;
};

/// Pools pixels (not per-frame metrics) across any number of frames.
/// Pixels count when 0 < target <= cap.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double cap,
                              AbsRelConvention convention = AbsRelConvention::kPrediction);

  /// Throws std::invalid_argument on a shape mismatch.
  void add(const DenseDepthImage& pred, const SparseDepthImage& target);
  std::size_t count() const { return count_; }
  /// Throws std::invalid_argument when no pixel has been accumulated.
  MetricsReport report() const;

 private:
  double cap_;
  AbsRelConvention convention_;
  std::size_t count_ = 0;
  std::size_t within_[3] = {0, 0, 0};
  double sum_sq_ = 0.0;
  double sum_abs_ = 0.0;
  double sum_rel_pred_ = 0.0;
  double sum_rel_target_ = 0.0;
};

/// δ1..δ3, RMSE and AbsRel over target pixels in (0, cap].
MetricsReport evaluate(const DenseDepthImage& pred, const SparseDepthImage& target, double cap,
                       AbsRelConvention convention = AbsRelConvention::kPrediction);

}  // namespace radardepth
