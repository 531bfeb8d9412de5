#include "radardepth/sid.hpp"

#include "radardepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace radardepth {

SidConfig::SidConfig(double alpha, double beta, int bins) : alpha_(alpha), beta_(beta), bins_(bins) {
  if (!(alpha > 0.0) || !(alpha < beta) || !std::isfinite(beta)) {
    throw std::invalid_argument("SidConfig: require 0 < alpha < beta");
  }
  if (bins < 2) {
    throw std::invalid_argument("SidConfig: require at least 2 bins");
  }
}

std::vector<double> sid_thresholds(const SidConfig& cfg) {
  const int k = cfg.bins();
  const double log_a = std::log(cfg.alpha());
  const double log_step = (std::log(cfg.beta()) - log_a) / k;
  std::vector<double> t(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    t[static_cast<std::size_t>(i)] = std::exp(log_a + i * log_step);
  }
  t.front() = cfg.alpha();
  t.back() = cfg.beta();
  return t;
}

int encode_depth(double depth, const SidConfig& cfg) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("encode_depth: depth must be positive");
  }
  const auto t = sid_thresholds(cfg);
  // upper_bound gives the first threshold > d; the bin is one before it.
  const auto it = std::upper_bound(t.begin(), t.end(), depth);
  const int i = static_cast<int>(it - t.begin()) - 1;
  return std::clamp(i, 0, cfg.bins() - 1);
}

double decode_bin(int bin, const SidConfig& cfg) {
  if (bin < 0 || bin >= cfg.bins()) {
    throw std::invalid_argument("decode_bin: bin " + std::to_string(bin) + " outside [0, " +
                                std::to_string(cfg.bins()) + ")");
  }
  const auto t = sid_thresholds(cfg);
  return std::sqrt(t[static_cast<std::size_t>(bin)] * t[static_cast<std::size_t>(bin) + 1]);
}

OrdinalLabelMap::OrdinalLabelMap(int width, int height, int bins)
    : width_(width), height_(height), bins_(bins) {
  if (width < 0 || height < 0 || bins < 2) {
    throw std::invalid_argument("OrdinalLabelMap: bad shape");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  labels_.assign(n, 0);
  mask_.assign(n, 0);
}

void OrdinalLabelMap::set(int u, int v, int label) {
  if (label < 0 || label >= bins_) {
    throw std::invalid_argument("OrdinalLabelMap: label outside [0, K)");
  }
  labels_[idx(u, v)] = label;
  mask_[idx(u, v)] = 1;
}

std::size_t OrdinalLabelMap::valid_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

OrdinalLabelMap encode_depth_map(const SparseDepthImage& depth, const SidConfig& cfg) {
  OrdinalLabelMap out(depth.width(), depth.height(), cfg.bins());
  const auto t = sid_thresholds(cfg);
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (d > 0.0) {
        const int i = static_cast<int>(std::upper_bound(t.begin(), t.end(), d) - t.begin()) - 1;
        out.set(u, v, std::clamp(i, 0, cfg.bins() - 1));
      }
    }
  }
  return out;
}

OrdinalLabelMap probs_to_labels(const ProbabilityVolume& probs) {
  OrdinalLabelMap out(probs.width(), probs.height(), probs.bins());
  for (int v = 0; v < probs.height(); ++v) {
    for (int u = 0; u < probs.width(); ++u) {
      int count = 0;
      for (int k = 0; k < probs.bins(); ++k) {
        count += probs.at(k, u, v) >= 0.5 ? 1 : 0;
      }
      out.set(u, v, std::min(count, probs.bins() - 1));
    }
  }
  return out;
}

DenseDepthImage decode_label_map(const OrdinalLabelMap& labels, const SidConfig& cfg) {
  if (labels.bins() != cfg.bins()) {
    throw std::invalid_argument("decode_label_map: bin count mismatch");
  }
  const auto t = sid_thresholds(cfg);
  Grid out(labels.width(), labels.height());
  for (int v = 0; v < labels.height(); ++v) {
    for (int u = 0; u < labels.width(); ++u) {
      if (!labels.valid(u, v)) {
        throw std::invalid_argument("decode_label_map: label map has invalid pixels");
      }
      const auto i = static_cast<std::size_t>(labels.label(u, v));
      out.at(u, v) = std::sqrt(t[i] * t[i + 1]);
    }
  }
  return DenseDepthImage(std::move(out));
}

}  // namespace radardepth
