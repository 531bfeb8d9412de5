#include "radardepth/radar_prep.hpp"

#include <cmath>
#include <stdexcept>

namespace radardepth {

MerMap::MerMap(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("MerMap: negative dimensions");
  }
  cells_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
}

void MerMap::add(int u, int v, MerEntry entry) {
  if (u < 0 || v < 0 || u >= width_ || v >= height_) {
    throw std::invalid_argument("MerMap: pixel outside the map");
  }
  if (!std::isfinite(entry.depth) || !(entry.depth > 0.0)) {
    throw std::invalid_argument("MerMap: entry depth must be positive");
  }
  if (!(entry.pda >= 0.0 && entry.pda <= 1.0)) {
    throw std::invalid_argument("MerMap: pda must lie in [0, 1]");
  }
  cells_[static_cast<std::size_t>(v) * width_ + u].push_back(entry);
}

const std::vector<MerEntry>& MerMap::entries(int u, int v) const {
  return cells_[static_cast<std::size_t>(v) * width_ + u];
}

PointCloud accumulate_sweeps(const std::vector<RadarSweep>& sweeps,
                             const Se3Pose& reference_cam_from_global) {
  if (sweeps.empty()) {
    throw std::invalid_argument("accumulate_sweeps: no sweeps given");
  }
  PointCloud out;
  for (const auto& sweep : sweeps) {
    const Se3Pose ref_from_sensor = compose(reference_cam_from_global, sweep.sensor_to_global);
    out.append(transform_points(ref_from_sensor, sweep.cloud));
  }
  return out;
}

int HeightBand::samples() const {
  validate();
  // Tolerance absorbs representation error in ratios such as 1.75 / 0.05.
  return static_cast<int>(std::floor((h_max - h_min) / step + 1e-9)) + 1;
}

void HeightBand::validate() const {
  if (!(h_min < h_max)) {
    throw std::invalid_argument("HeightBand: h_min must be below h_max");
  }
  if (!(step > 0.0)) {
    throw std::invalid_argument("HeightBand: step must be positive");
  }
}

PointCloud height_extend(const PointCloud& cloud_world, const HeightBand& band) {
  const int n = band.samples();
  PointCloud out;
  out.points.reserve(cloud_world.size() * static_cast<std::size_t>(n));
  const bool has_rr = !cloud_world.range_rate.empty();
  const bool has_in = !cloud_world.intensity.empty();
  const bool has_vel = !cloud_world.velocity.empty();
  for (std::size_t i = 0; i < cloud_world.size(); ++i) {
    const auto& p = cloud_world.points[i];
    for (int s = 0; s < n; ++s) {
      const double h = band.h_min + s * band.step;
      out.points.emplace_back(p.x(), -h, p.z());
      if (has_rr) {
        out.range_rate.push_back(cloud_world.range_rate[i]);
      }
      if (has_in) {
        out.intensity.push_back(cloud_world.intensity[i]);
      }
      if (has_vel) {
        out.velocity.push_back(cloud_world.velocity[i]);
      }
    }
  }
  return out;
}

SparseDepthImage mer_threshold(const MerMap& mer, double pda_min) {
  if (!(pda_min >= 0.0 && pda_min <= 1.0)) {
    throw std::invalid_argument("mer_threshold: pda_min must lie in [0, 1]");
  }
  SparseDepthImage out(mer.width(), mer.height());
  for (int v = 0; v < mer.height(); ++v) {
    for (int u = 0; u < mer.width(); ++u) {
      const MerEntry* best = nullptr;
      for (const auto& e : mer.entries(u, v)) {
        if (e.pda >= pda_min && (best == nullptr || e.pda > best->pda)) {
          best = &e;
        }
      }
      if (best != nullptr) {
        out.set(u, v, best->depth);
      }
    }
  }
  return out;
}

}  // namespace radardepth
