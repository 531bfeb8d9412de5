#include "radardepth/synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace radardepth {

namespace {

constexpr double kHitEpsilon = 1e-9;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int box = -1;     // −1 ground
  int axis = -1;    // face normal axis for boxes
  bool any = false;
};

/// Nearest intersection along o + t·d (t > 0) with the ground plane and the
/// boxes at `time`. `t` is in units of |d|.
Hit cast_ray(const SceneConfig& scene, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
             double time) {
  Hit best;
  const double ground_y = -scene.ground_height;
  if (d.y() > 0.0 && o.y() < ground_y) {
    best.t = (ground_y - o.y()) / d.y();
    best.any = true;
  }
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const Box& b = scene.boxes[i];
    const Eigen::Vector3d c = b.center_at(time);
    const Eigen::Vector3d lo = c - 0.5 * b.size;
    const Eigen::Vector3d hi = c + 0.5 * b.size;
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    int axis = -1;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) {
        if (o[a] < lo[a] || o[a] > hi[a]) {
          miss = true;
          break;
        }
        continue;
      }
      double t1 = (lo[a] - o[a]) / d[a];
      double t2 = (hi[a] - o[a]) / d[a];
      if (t1 > t2) {
        std::swap(t1, t2);
      }
      if (t1 > tmin) {
        tmin = t1;
        axis = a;
      }
      tmax = std::min(tmax, t2);
    }
    if (miss || tmax < tmin || tmin <= kHitEpsilon) {
      continue;
    }
    if (tmin < best.t) {
      best.t = tmin;
      best.box = static_cast<int>(i);
      best.axis = axis;
      best.any = true;
    }
  }
  return best;
}

double face_factor(int axis) {
  switch (axis) {
    case 0:
      return 0.75;  // side faces
    case 1:
      return 1.15;  // top
    default:
      return 1.0;  // front/back
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Vector3d spherical_dir(double elevation, double azimuth) {
  return {std::cos(elevation) * std::sin(azimuth), -std::sin(elevation),
          std::cos(elevation) * std::cos(azimuth)};
}

constexpr std::uint64_t kLidarStream = 1;
constexpr std::uint64_t kRadarStream = 2;
constexpr std::uint64_t kMerStream = 3;

}  // namespace

Box Box::on_ground(double x, double z, double width, double height, double length,
                   double albedo) {
  Box b;
  b.center = {x, -0.5 * height, z};
  b.size = {width, height, length};
  b.albedo = albedo;
  return b;
}

void SceneConfig::validate() const {
  if (!(camera_height > ground_height)) {
    throw std::invalid_argument("SceneConfig: camera must be above the ground plane");
  }
  if (!(far_cap > 0.0)) {
    throw std::invalid_argument("SceneConfig: far cap must be positive");
  }
  if (!(frame_interval >= 0.0) || !std::isfinite(ego_velocity)) {
    throw std::invalid_argument("SceneConfig: bad ego motion");
  }
  for (const auto& b : boxes) {
    if (!(b.size.minCoeff() > 0.0) || !b.center.allFinite() || !b.velocity.allFinite()) {
      throw std::invalid_argument("SceneConfig: boxes need finite centers and positive sizes");
    }
  }
}

Se3Pose SceneConfig::ego_pose(int index) const {
  return Se3Pose::from_translation({0.0, -camera_height, ego_velocity * frame_interval * index});
}

std::vector<double> LidarConfig::default_elevations() {
  constexpr double kDeg = std::numbers::pi / 180.0;
  std::vector<double> out;
  for (int i = 0; i < 32; ++i) {
    out.push_back((-30.67 + i * (41.34 / 31.0)) * kDeg);
  }
  return out;
}

void LidarConfig::validate() const {
  if (!(dropout >= 0.0 && dropout <= 1.0)) {
    throw std::invalid_argument("LidarConfig: dropout must lie in [0, 1]");
  }
  if (!(azimuth_step > 0.0) || !(azimuth_min <= azimuth_max) || !(max_range > 0.0)) {
    throw std::invalid_argument("LidarConfig: bad azimuth sweep or range");
  }
}

void RadarConfig::validate() const {
  if (points_per_object < 0 || !(range_sigma >= 0.0) || !(azimuth_sigma >= 0.0) ||
      !(clutter_rate >= 0.0)) {
    throw std::invalid_argument("RadarConfig: counts, sigmas and rates must be non-negative");
  }
  if (!(vertical_fov > 0.0) || !(horizontal_fov > 0.0) || !(max_range > min_clutter_range)) {
    throw std::invalid_argument("RadarConfig: bad field of view or range");
  }
}

Rendering render(const SceneConfig& scene, const CameraIntrinsics& k, const Se3Pose& ego_pose,
                 double time) {
  scene.validate();
  k.validate();
  Grid depth(k.width, k.height);
  Grid image(k.width, k.height);
  const Eigen::Vector3d& o = ego_pose.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Hit hit = cast_ray(scene, o, ego_pose.rotation() * dir_cam, time);
      if (!hit.any) {
        depth.at(u, v) = scene.far_cap;
        image.at(u, v) = scene.sky_intensity;
        continue;
      }
      // dir_cam has unit z, so the ray parameter is the camera-frame depth.
      const double d = std::min(hit.t, scene.far_cap);
      const double albedo = hit.box < 0 ? scene.ground_albedo : scene.boxes[hit.box].albedo;
      const double face = hit.box < 0 ? 1.0 : face_factor(hit.axis);
      depth.at(u, v) = d;
      image.at(u, v) = std::clamp(albedo * face / (1.0 + d / 40.0), 0.0, 1.0);
    }
  }
  return {DenseDepthImage(std::move(depth)), std::move(image)};
}

DenseDepthImage render_depth(const SceneConfig& scene, const CameraIntrinsics& k,
                             const Se3Pose& ego_pose, double time) {
  return render(scene, k, ego_pose, time).depth;
}

PointCloud sample_lidar(const SceneConfig& scene, const Se3Pose& ego_pose, const LidarConfig& cfg,
                        std::mt19937_64& rng, double time) {
  scene.validate();
  cfg.validate();
  const int n_az = static_cast<int>(std::floor((cfg.azimuth_max - cfg.azimuth_min) / cfg.azimuth_step + 1e-9)) + 1;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  PointCloud out;
  for (double el : cfg.elevations) {
    for (int j = 0; j < n_az; ++j) {
      const double az = cfg.azimuth_min + j * cfg.azimuth_step;
      const Eigen::Vector3d dir = spherical_dir(el, az);
      const Hit hit = cast_ray(scene, ego_pose.translation(), ego_pose.rotation() * dir, time);
      // One draw per direction keeps the stream aligned whatever the scene.
      const bool keep = coin(rng) >= cfg.dropout;
      if (hit.any && hit.t <= cfg.max_range && keep) {
        out.points.push_back(hit.t * dir);
      }
    }
  }
  return out;
}

RadarSweep sample_radar(const SceneConfig& scene, const Se3Pose& ego_pose, const RadarConfig& cfg,
                        std::mt19937_64& rng, double time) {
  scene.validate();
  cfg.validate();
  const Eigen::Matrix3d& rot = ego_pose.rotation();
  // Radar origin in the camera frame (y down).
  const Eigen::Vector3d offset(0.0, scene.camera_height - cfg.mounting_height, 0.0);
  const Eigen::Vector3d origin = ego_pose.apply(offset);
  const Eigen::Vector3d ego_vel = rot.transpose() * Eigen::Vector3d(0.0, 0.0, scene.ego_velocity);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  RadarSweep sweep;
  sweep.sensor_to_global = ego_pose;
  sweep.timestamp = time;
  auto emit = [&](double range, double el, double az, const Eigen::Vector3d& rel_vel) {
    sweep.cloud.points.push_back(range * spherical_dir(el, az) + offset);
    sweep.cloud.velocity.emplace_back(rel_vel.x(), rel_vel.z());
  };

  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const Box& b = scene.boxes[i];
    const Eigen::Vector3d c = b.center_at(time);
    double az_lo = std::numeric_limits<double>::infinity();
    double az_hi = -az_lo;
    double nearest = std::numeric_limits<double>::infinity();
    bool ahead = false;
    for (int corner = 0; corner < 8; ++corner) {
      const Eigen::Vector3d sign((corner & 1) ? 0.5 : -0.5, (corner & 2) ? 0.5 : -0.5,
                                 (corner & 4) ? 0.5 : -0.5);
      const Eigen::Vector3d p = rot.transpose() * (c + sign.cwiseProduct(b.size) - origin);
      if (p.z() <= 0.0) {
        continue;
      }
      ahead = true;
      const double az = std::atan2(p.x(), p.z());
      az_lo = std::min(az_lo, az);
      az_hi = std::max(az_hi, az);
      nearest = std::min(nearest, std::hypot(p.x(), p.z()));
    }
    az_lo = std::max(az_lo, -cfg.horizontal_fov);
    az_hi = std::min(az_hi, cfg.horizontal_fov);
    if (!ahead || az_lo >= az_hi || nearest > cfg.max_range) {
      continue;
    }
    const Eigen::Vector3d rel_vel = rot.transpose() * b.velocity - ego_vel;
    int found = 0;
    for (int attempt = 0; attempt < 10 * cfg.points_per_object && found < cfg.points_per_object;
         ++attempt) {
      const double az = uniform(rng, az_lo, az_hi);
      const double el = uniform(rng, -cfg.vertical_fov, cfg.vertical_fov);
      const Hit hit = cast_ray(scene, origin, rot * spherical_dir(el, az), time);
      if (hit.box != static_cast<int>(i) || hit.t > cfg.max_range) {
        continue;
      }
      ++found;
      const double range = hit.t + cfg.range_sigma * unit_normal(rng);
      const double az_noisy = az + cfg.azimuth_sigma * unit_normal(rng);
      if (range > 0.1) {
        emit(range, el, az_noisy, rel_vel);
      }
    }
  }

  if (cfg.clutter_rate > 0.0) {
    const int n = std::poisson_distribution<int>(cfg.clutter_rate)(rng);
    for (int j = 0; j < n; ++j) {
      const double range = uniform(rng, cfg.min_clutter_range, cfg.max_range);
      const double az = uniform(rng, -cfg.horizontal_fov, cfg.horizontal_fov);
      const double el = uniform(rng, -cfg.vertical_fov, cfg.vertical_fov);
      emit(range, el, az, -ego_vel);
    }
  }
  return sweep;
}

MerMap generate_mer(const PointCloud& radar_cam, const Grid& image, const CameraIntrinsics& k,
                    std::mt19937_64& rng) {
  if (image.width() != k.width || image.height() != k.height) {
    throw std::invalid_argument("generate_mer: image does not match the intrinsics");
  }
  MerMap mer(k.width, k.height);
  std::uniform_real_distribution<double> jitter(0.85, 1.0);
  constexpr double kIntensitySigma = 0.04;
  constexpr double kPixelSigma = 5.0;
  for (const auto& p : radar_cam.points) {
    const auto px = project_pixel(p, k);
    if (!px) {
      continue;
    }
    const double ref = image.at(px->first, px->second);
    for (int dv = -10; dv <= 3; ++dv) {
      for (int du = -2; du <= 2; ++du) {
        const int u = px->first + du;
        const int v = px->second + dv;
        if (u < 0 || v < 0 || u >= k.width || v >= k.height) {
          continue;
        }
        const double di = (image.at(u, v) - ref) / kIntensitySigma;
        const double r2 = (du * du + dv * dv) / (kPixelSigma * kPixelSigma);
        const double pda = std::exp(-0.5 * (di * di + r2)) * jitter(rng);
        if (pda >= 0.2) {
          mer.add(u, v, {p.z(), pda});
        }
      }
    }
  }
  return mer;
}

std::mt19937_64 frame_rng(std::uint64_t seed, int frame_index, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ static_cast<std::uint64_t>(frame_index)) + stream));
}

void gen_sequence(const SceneConfig& scene, const SensorModelConfig& sensors,
                  const CameraIntrinsics& k, int n_frames, std::uint64_t seed,
                  const std::filesystem::path& out_dir) {
  scene.validate();
  k.validate();
  sensors.lidar.validate();
  sensors.radar.validate();
  if (n_frames < 0) {
    throw std::invalid_argument("gen_sequence: negative frame count");
  }
  std::vector<RadarSweep> history;
  for (int i = 0; i < n_frames; ++i) {
    const double time = i * scene.frame_interval;
    const Se3Pose pose = scene.ego_pose(i);
    Rendering r = render(scene, k, pose, time);

    auto lidar_rng = frame_rng(seed, i, kLidarStream);
    auto radar_rng = frame_rng(seed, i, kRadarStream);
    FrameRecord rec;
    rec.frame_index = i;
    rec.pose = pose;
    rec.intrinsics = k;
    rec.lidar = sample_lidar(scene, pose, sensors.lidar, lidar_rng, time);
    RadarSweep sweep = sample_radar(scene, pose, sensors.radar, radar_rng, time);
    rec.radar = sweep.cloud;

    if (sensors.emit_mer) {
      history.push_back(std::move(sweep));
      if (static_cast<int>(history.size()) > std::max(1, sensors.mer_sweeps)) {
        history.erase(history.begin());
      }
      const PointCloud acc = accumulate_sweeps(history, pose.inverse());
      auto mer_rng = frame_rng(seed, i, kMerStream);
      rec.mer = generate_mer(acc, r.image, k, mer_rng);
    }
    rec.image = std::move(r.image);
    rec.gt_depth = std::move(r.depth);
    write_frame(out_dir / frame_dir_name(i), rec);
  }
}

CameraIntrinsics desk_intrinsics() {
  CameraIntrinsics k;
  k.fx = 160.0;
  k.fy = 160.0;
  k.cx = 100.0;
  k.cy = 32.0;
  k.width = 200;
  k.height = 88;
  return k;
}

SceneConfig stock_scene(std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  SceneConfig s;
  s.seed = seed;
  s.ego_velocity = uniform(rng, 4.0, 8.0);
  s.frame_interval = 0.1;

  auto vehicle = [&](double x, double z) {
    const double kind = uniform(rng, 0.0, 1.0);
    const double albedo = uniform(rng, 0.15, 0.85);
    if (kind < 0.7) {
      return Box::on_ground(x, z, 1.8, 1.5, 4.2, albedo);
    }
    if (kind < 0.9) {
      return Box::on_ground(x, z, 2.0, 2.2, 5.0, albedo);
    }
    return Box::on_ground(x, z, 2.5, 3.2, 8.0, albedo);
  };

  for (double side : {-1.0, 1.0}) {
    double z = uniform(rng, 5.0, 12.0);
    while (z <= 60.0) {
      const double x = side * uniform(rng, 3.0, 5.5);
      s.boxes.push_back(vehicle(x, z));
      z += uniform(rng, 7.0, 14.0);
    }
  }
  if (uniform(rng, 0.0, 1.0) < 0.6) {
    Box lead = vehicle(uniform(rng, -0.5, 0.5), uniform(rng, 15.0, 45.0));
    lead.velocity = {0.0, 0.0, s.ego_velocity + uniform(rng, -1.5, 1.5)};
    s.boxes.push_back(lead);
  }
  const double dir = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  Box crossing = vehicle(-dir * uniform(rng, 4.0, 8.0), uniform(rng, 22.0, 45.0));
  crossing.velocity = {dir * uniform(rng, 2.0, 5.0), 0.0, 0.0};
  s.boxes.push_back(crossing);
  return s;
}

void gen_stock_suite(const SuiteConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.sequences <= 0 || cfg.frames_per_sequence <= 0) {
    throw std::invalid_argument("gen_stock_suite: need at least one sequence and frame");
  }
  SensorModelConfig sensors;
  sensors.emit_mer = cfg.emit_mer;
  const CameraIntrinsics k = desk_intrinsics();
  for (int s = 0; s < cfg.sequences; ++s) {
    char name[16];
    std::snprintf(name, sizeof name, "seq_%02d", s);
    const std::uint64_t seq_seed = splitmix64(cfg.seed + static_cast<std::uint64_t>(s));
    gen_sequence(stock_scene(seq_seed), sensors, k, cfg.frames_per_sequence, seq_seed, out_dir / name);
  }
}

}  // namespace radardepth
