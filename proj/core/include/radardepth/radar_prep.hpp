#pragma once

#include "radardepth/geometry.hpp"

#include <vector>

namespace radardepth {

/// One radar scan in its sensor frame.
struct RadarSweep {
  PointCloud cloud;
  Se3Pose sensor_to_global;
  double timestamp = 0.0;
};

struct MerEntry {
  double depth = 0.0;  // meters, > 0
  double pda = 0.0;    // association confidence in [0, 1]
};

/// Precomputed multi-channel enhanced radar: a list of (depth, confidence)
/// candidates per pixel.
class MerMap {
 public:
  MerMap() = default;
  MerMap(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  /// Throws std::invalid_argument for out-of-range pixels, depth <= 0 or pda outside [0, 1].
  void add(int u, int v, MerEntry entry);
  const std::vector<MerEntry>& entries(int u, int v) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<MerEntry>> cells_;
};

/// Maps every sweep into the reference camera frame through
/// reference_cam_from_global ∘ sensor_to_global, preserving sweep then point
/// order. Throws std::invalid_argument on an empty sweep list.
PointCloud accumulate_sweeps(const std::vector<RadarSweep>& sweeps,
                             const Se3Pose& reference_cam_from_global);

struct HeightBand {
  double h_min = 0.25;
  double h_max = 2.0;
  double step = 0.05;

  /// Samples per point: floor((h_max - h_min) / step) + 1.
  int samples() const;
  void validate() const;
};

/// Replaces each world-frame point by a vertical column of samples at
/// heights h_min, h_min + step, ... <= h_max, keeping x and z. World height
/// is -y. Output is grouped per source point.
PointCloud height_extend(const PointCloud& cloud_world, const HeightBand& band = {});

/// Per pixel, the depth of the highest-confidence entry with pda >= pda_min
/// (first entry wins on equal confidence); 0 where nothing qualifies.
SparseDepthImage mer_threshold(const MerMap& mer, double pda_min = 0.5);

}  // namespace radardepth
