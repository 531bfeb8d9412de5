#include "radardepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radardepth {

double ProbabilityVolume::clamp(double p) {
  return std::clamp(p, kEpsilon, 1.0 - kEpsilon);
}

ProbabilityVolume::ProbabilityVolume(int bins, int width, int height, double fill)
    : bins_(bins), width_(width), height_(height) {
  if (bins < 1 || width < 0 || height < 0) {
    throw std::invalid_argument("ProbabilityVolume: bad shape");
  }
  values_.assign(static_cast<std::size_t>(bins) * width * height, clamp(fill));
}

ProbabilityVolume::ProbabilityVolume(int bins, int width, int height, std::vector<double> values)
    : bins_(bins), width_(width), height_(height), values_(std::move(values)) {
  if (bins < 1 || width < 0 || height < 0 ||
      values_.size() != static_cast<std::size_t>(bins) * width * height) {
    throw std::invalid_argument("ProbabilityVolume: value count does not match shape");
  }
  for (double& p : values_) {
    if (std::isnan(p)) {
      throw std::invalid_argument("ProbabilityVolume: NaN probability");
    }
    p = clamp(p);
  }
}

void ProbabilityVolume::set(int k, int u, int v, double p) {
  if (std::isnan(p)) {
    throw std::invalid_argument("ProbabilityVolume: NaN probability");
  }
  values_[index(k, u, v)] = clamp(p);
}

LossResult l1_loss(const DenseDepthImage& pred, const SparseDepthImage& target,
                   LossNormalization norm) {
  if (!pred.grid().same_shape(target.grid())) {
    throw std::invalid_argument("l1_loss: prediction and target differ in shape");
  }
  const std::size_t valid = target.valid_count();
  if (valid == 0) {
    throw std::invalid_argument("l1_loss: target has no valid pixels");
  }
  const double m = norm == LossNormalization::kValidPixels
                       ? static_cast<double>(valid)
                       : static_cast<double>(target.grid().size());
  LossResult out;
  out.gradient.assign(target.grid().size(), 0.0);
  const auto p = pred.grid().values();
  const auto t = target.grid().values();
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > 0.0) {
      const double diff = p[i] - t[i];
      sum += std::abs(diff);
      out.gradient[i] = diff > 0.0 ? 1.0 / m : (diff < 0.0 ? -1.0 / m : 0.0);
    }
  }
  out.value = sum / m;
  return out;
}

LossResult ordinal_loss(const ProbabilityVolume& probs, const OrdinalLabelMap& labels,
                        LossNormalization norm) {
  if (probs.width() != labels.width() || probs.height() != labels.height() ||
      probs.bins() != labels.bins()) {
    throw std::invalid_argument("ordinal_loss: probability volume and labels differ in shape");
  }
  const std::size_t valid = labels.valid_count();
  if (valid == 0) {
    throw std::invalid_argument("ordinal_loss: no valid labels");
  }
  const double m = norm == LossNormalization::kValidPixels
                       ? static_cast<double>(valid)
                       : static_cast<double>(labels.width()) * labels.height();
  LossResult out;
  out.gradient.assign(probs.values().size(), 0.0);
  double psi_sum = 0.0;
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      if (!labels.valid(u, v)) {
        continue;
      }
      const int l = labels.label(u, v);
      double psi = 0.0;
      for (int k = 0; k < probs.bins(); ++k) {
        const double p = probs.at(k, u, v);
        const std::size_t i = probs.index(k, u, v);
        if (k < l) {
          psi += std::log(p);
          out.gradient[i] = -1.0 / (m * p);
        } else {
          psi += std::log1p(-p);
          out.gradient[i] = 1.0 / (m * (1.0 - p));
        }
      }
      psi_sum += psi;
    }
  }
  out.value = -psi_sum / m;
  return out;
}

}  // namespace radardepth
