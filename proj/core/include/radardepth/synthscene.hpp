#pragma once

#include "radardepth/dataset.hpp"
#include "radardepth/geometry.hpp"
#include "radardepth/radar_prep.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace radardepth {

/// Axis-aligned box in the global frame (y down, so a box resting on the
/// ground has center.y = −size.y / 2).
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  /// Global-frame velocity (m/s); boxes move linearly with frame time.
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double albedo = 0.6;

  static Box on_ground(double x, double z, double width, double height, double length,
                       double albedo);
  Eigen::Vector3d center_at(double time) const { return center + velocity * time; }
};

struct SceneConfig {
  double ground_height = 0.0;  // world height of the ground plane
  double camera_height = 1.5;
  std::vector<Box> boxes;
  /// Ego moves along +z of the global frame.
  double ego_velocity = 0.0;
  double frame_interval = 0.1;
  double far_cap = 80.0;
  double ground_albedo = 0.45;
  double sky_intensity = 0.9;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on a non-positive camera height above
  /// ground, non-positive box sizes or far cap.
  void validate() const;
  /// Camera → global pose at frame `index`.
  Se3Pose ego_pose(int index) const;
};

struct LidarConfig {
  /// Beam elevations in radians, positive up.
  std::vector<double> elevations = default_elevations();
  double azimuth_min = -0.6;  // radians, positive right
  double azimuth_max = 0.6;
  double azimuth_step = 0.006;
  double dropout = 0.0;
  double max_range = 80.0;

  /// 32 beams evenly spaced from −30.67° to +10.67°.
  static std::vector<double> default_elevations();
  void validate() const;
};

struct RadarConfig {
  int points_per_object = 3;
  double mounting_height = 0.5;  // world height of the radar
  double range_sigma = 0.25;
  double azimuth_sigma = 0.005;
  /// Mean clutter detections per sweep (Poisson).
  double clutter_rate = 1.0;
  double vertical_fov = 0.0873;    // |elevation| limit, radians (±5°)
  double horizontal_fov = 0.6;     // |azimuth| limit, radians
  double max_range = 80.0;
  double min_clutter_range = 2.0;

  void validate() const;
};

struct SensorModelConfig {
  LidarConfig lidar;
  RadarConfig radar;
  /// Write a synthetic MER file per frame (see generate_mer).
  bool emit_mer = false;
  /// Radar sweeps combined when synthesising MER (current plus previous).
  int mer_sweeps = 5;
};

/// Nearest hit among ground and boxes for every pixel centre.
DenseDepthImage render_depth(const SceneConfig& scene, const CameraIntrinsics& k,
                             const Se3Pose& ego_pose, double time = 0.0);

/// Depth plus the shaded grayscale image (albedo × face factor × distance falloff).
struct Rendering {
  DenseDepthImage depth;
  Grid image;
};
Rendering render(const SceneConfig& scene, const CameraIntrinsics& k, const Se3Pose& ego_pose,
                 double time = 0.0);

/// Exact lidar returns (camera frame, lidar at the camera centre) for every
/// beam direction that hits within max_range; each kept with prob. 1 − dropout.
PointCloud sample_lidar(const SceneConfig& scene, const Se3Pose& ego_pose, const LidarConfig& cfg,
                        std::mt19937_64& rng, double time = 0.0);

/// Radar detections in the camera frame (the sweep's sensor_to_global is
/// the ego camera pose). Box returns come from rays leaving the radar
/// within its vertical field of view; range and azimuth noise keep each
/// point's elevation. Clutter is uniform over the radar frustum. Each point
/// carries its ego-relative planar velocity.
RadarSweep sample_radar(const SceneConfig& scene, const Se3Pose& ego_pose, const RadarConfig& cfg,
                        std::mt19937_64& rng, double time = 0.0);

/// Stand-in for an upstream radar-camera association network: each radar
/// point spreads into a window of pixels, with confidence from image cues
/// only (intensity similarity to the hit pixel and pixel distance), so the
/// associations make the mistakes a learned model would.
MerMap generate_mer(const PointCloud& radar_cam, const Grid& image, const CameraIntrinsics& k,
                    std::mt19937_64& rng);

/// Per-frame RNG stream: a pure function of (seed, frame, stream).
std::mt19937_64 frame_rng(std::uint64_t seed, int frame_index, std::uint64_t stream);

/// Writes n_frames frames to out_dir/frame_NNNNNN. Byte-identical for the
/// same arguments.
void gen_sequence(const SceneConfig& scene, const SensorModelConfig& sensors,
                  const CameraIntrinsics& k, int n_frames, std::uint64_t seed,
                  const std::filesystem::path& out_dir);

/// Intrinsics of the 200×88 desk-scale camera.
CameraIntrinsics desk_intrinsics();

/// Straight road with parked boxes at 5–60 m on both sides and one box
/// crossing the road; layout drawn from `seed`.
SceneConfig stock_scene(std::uint64_t seed);

struct SuiteConfig {
  int sequences = 10;
  int frames_per_sequence = 20;
  std::uint64_t seed = 7;
  bool emit_mer = true;
};

/// Generates the stock suite under out_dir/seq_NN/.
void gen_stock_suite(const SuiteConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace radardepth
