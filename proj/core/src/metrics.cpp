#include "radardepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radardepth {

MetricsAccumulator::MetricsAccumulator(double cap, AbsRelConvention convention)
    : cap_(cap), convention_(convention) {
  if (!(cap > 0.0)) {
    throw std::invalid_argument("MetricsAccumulator: cap must be positive");
  }
}

void MetricsAccumulator::add(const DenseDepthImage& pred, const SparseDepthImage& target) {
  if (!pred.grid().same_shape(target.grid())) {
    throw std::invalid_argument("evaluate: prediction and target differ in shape");
  }
  const auto p = pred.grid().values();
  const auto t = target.grid().values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || t[i] > cap_) {
      continue;
    }
    const double ratio = std::max(t[i] / p[i], p[i] / t[i]);
    within_[0] += ratio < 1.25 ? 1 : 0;
    within_[1] += ratio < 1.25 * 1.25 ? 1 : 0;
    within_[2] += ratio < 1.25 * 1.25 * 1.25 ? 1 : 0;
    const double diff = p[i] - t[i];
    sum_sq_ += diff * diff;
    sum_abs_ += std::abs(diff);
    sum_rel_pred_ += std::abs(diff) / std::abs(p[i]);
    sum_rel_target_ += std::abs(diff) / std::abs(t[i]);
    ++count_;
  }
}

MetricsReport MetricsAccumulator::report() const {
  if (count_ == 0) {
    throw std::invalid_argument("evaluate: no valid target pixels within the cap");
  }
  const double n = static_cast<double>(count_);
  MetricsReport r;
  r.delta1 = static_cast<double>(within_[0]) / n;
  r.delta2 = static_cast<double>(within_[1]) / n;
  r.delta3 = static_cast<double>(within_[2]) / n;
  r.rmse = std::sqrt(sum_sq_ / n);
  r.mae = sum_abs_ / n;
  r.absrel_pred = sum_rel_pred_ / n;
  r.absrel_target = sum_rel_target_ / n;
  r.absrel = convention_ == AbsRelConvention::kPrediction ? r.absrel_pred : r.absrel_target;
  r.valid_pixel_count = count_;
  r.cap = cap_;
  return r;
}

MetricsReport evaluate(const DenseDepthImage& pred, const SparseDepthImage& target, double cap,
                       AbsRelConvention convention) {
  MetricsAccumulator acc(cap, convention);
  acc.add(pred, target);
  return acc.report();
}

}  // namespace radardepth
