#include "radardepth/synthscene.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

using namespace radardepth;
namespace fs = std::filesystem;

namespace {

CameraIntrinsics wide_camera() { return {500.0, 500.0, 400.0, 175.0, 800, 350}; }

double deg(double d) { return d * std::numbers::pi / 180.0; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("radardepth_synth_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<fs::path> tree(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

SensorModelConfig quiet_sensors() {
  SensorModelConfig s;
  s.radar.range_sigma = 0.0;
  s.radar.azimuth_sigma = 0.0;
  s.radar.clutter_rate = 0.0;
  return s;
}

}  // namespace

TEST(RenderDepth, GroundAndSky) {
  SceneConfig scene;
  auto k = wide_camera();
  auto d = render_depth(scene, k, scene.ego_pose(0));
  EXPECT_NEAR(d.at(400, 275), 1.5 * 500 / (275 - 175), 1e-9);
  EXPECT_NEAR(d.at(100, 275), 7.5, 1e-9);  // z does not depend on the column
  for (int v = 0; v <= 175; ++v) EXPECT_EQ(d.at(400, v), 80.0);
  for (double x : d.grid().values()) EXPECT_LE(x, 80.0);
}

TEST(RenderDepth, BoxFaceWins) {
  SceneConfig scene;
  scene.boxes.push_back(Box::on_ground(0.0, 12.0, 4.0, 3.0, 4.0, 0.6));  // front face at z = 10
  auto k = wide_camera();
  auto d = render_depth(scene, k, scene.ego_pose(0));
  EXPECT_NEAR(d.at(400, 175), 10.0, 1e-9);
  EXPECT_NEAR(d.at(400, 200), 10.0, 1e-9);  // ground behind is at 30 m
}

TEST(Render, ImageInUnitRange) {
  auto scene = stock_scene(3);
  auto r = render(scene, desk_intrinsics(), scene.ego_pose(0));
  EXPECT_TRUE(r.image.same_shape(r.depth.grid()));
  for (double x : r.image.values()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(SampleLidar, FullDropoutIsEmpty) {
  auto scene = stock_scene(1);
  LidarConfig cfg;
  cfg.dropout = 1.0;
  std::mt19937_64 rng(1);
  EXPECT_TRUE(sample_lidar(scene, scene.ego_pose(0), cfg, rng).empty());
}

TEST(SampleLidar, DownwardBeamRange) {
  SceneConfig scene;
  LidarConfig cfg;
  cfg.elevations = {deg(-10.0)};
  cfg.azimuth_min = cfg.azimuth_max = 0.0;
  std::mt19937_64 rng(1);
  auto c = sample_lidar(scene, scene.ego_pose(0), cfg, rng);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c.points[0].norm(), 1.5 / std::sin(deg(10.0)), 1e-9);
  EXPECT_NEAR(c.points[0].norm(), 8.638, 1e-3);
}

TEST(SampleLidar, EmptySceneCount) {
  SceneConfig scene;
  LidarConfig cfg;
  std::mt19937_64 rng(1);
  auto c = sample_lidar(scene, scene.ego_pose(0), cfg, rng);
  // Downward beams reach the ground at 1.5 / sin|e|, kept within 80 m.
  int beams = 0;
  for (double e : cfg.elevations)
    if (e < 0 && 1.5 / std::sin(-e) <= 80.0) ++beams;
  int az = static_cast<int>(std::llround((cfg.azimuth_max - cfg.azimuth_min) / cfg.azimuth_step)) + 1;
  EXPECT_EQ(c.size(), static_cast<std::size_t>(beams * az));
  EXPECT_EQ(cfg.elevations.size(), 32u);
}

TEST(SampleLidar, RangesAgreeWithRenderedDepth) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto scene = stock_scene(seed);
    auto k = desk_intrinsics();
    auto pose = scene.ego_pose(4);
    double t = 4 * scene.frame_interval;
    std::mt19937_64 rng(seed);
    auto cloud = sample_lidar(scene, pose, LidarConfig{}, rng, t);
    auto depth = render_depth(scene, k, pose, t);
    int checked = 0;
    for (const auto& p : cloud.points) {
      auto px = project_pixel(p, k);
      // The 3x3 bracket needs both neighbours on each axis.
      if (!px || px->first < 1 || px->second < 1 || px->first > k.width - 2 ||
          px->second > k.height - 2)
        continue;
      double lo = 1e9, hi = 0.0;
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du) {
          lo = std::min(lo, depth.at(px->first + du, px->second + dv));
          hi = std::max(hi, depth.at(px->first + du, px->second + dv));
        }
      EXPECT_GE(p.z(), lo - 1e-9);
      EXPECT_LE(p.z(), hi + 1e-9);
      ++checked;
    }
    EXPECT_GT(checked, 500);
  }
}

TEST(SampleRadar, EmptySceneWithoutClutter) {
  SceneConfig scene;
  RadarConfig cfg;
  cfg.clutter_rate = 0.0;
  std::mt19937_64 rng(1);
  auto s = sample_radar(scene, scene.ego_pose(0), cfg, rng);
  EXPECT_TRUE(s.cloud.empty());
}

TEST(SampleRadar, NoiseFreeFace) {
  SceneConfig scene;
  scene.boxes.push_back(Box::on_ground(0.0, 22.0, 4.0, 3.0, 4.0, 0.6));  // front face at z = 20
  auto cfg = quiet_sensors().radar;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto s = sample_radar(scene, scene.ego_pose(0), cfg, rng);
    ASSERT_EQ(s.cloud.size(), 3u);
    for (const auto& p : s.cloud.points) EXPECT_NEAR(p.z(), 20.0, 1e-9);
  }
}

TEST(SampleRadar, DeterministicAndWithinVerticalFov) {
  RadarConfig cfg;
  cfg.clutter_rate = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = stock_scene(seed);
    auto pose = scene.ego_pose(2);
    std::mt19937_64 a(seed), b(seed);
    auto s1 = sample_radar(scene, pose, cfg, a, 0.2);
    auto s2 = sample_radar(scene, pose, cfg, b, 0.2);
    EXPECT_EQ(s1.cloud.points, s2.cloud.points);
    EXPECT_EQ(s1.cloud.velocity, s2.cloud.velocity);
    EXPECT_FALSE(s1.cloud.empty());
    const Eigen::Vector3d origin(0.0, scene.camera_height - cfg.mounting_height, 0.0);
    for (const auto& p : s1.cloud.points) {
      Eigen::Vector3d r = p - origin;
      double elevation = std::atan2(-r.y(), std::hypot(r.x(), r.z()));
      EXPECT_LE(std::abs(elevation), cfg.vertical_fov + 1e-12);
    }
  }
}

TEST(FrameRng, PureFunctionOfInputs) {
  auto a = frame_rng(7, 3, 1), b = frame_rng(7, 3, 1);
  auto c = frame_rng(7, 4, 1), d = frame_rng(7, 3, 2), e = frame_rng(8, 3, 1);
  auto first = a();
  EXPECT_EQ(first, b());
  EXPECT_NE(first, c());
  EXPECT_NE(first, d());
  EXPECT_NE(first, e());
}

TEST(GenSequence, SingleFrameHasSixFiles) {
  TempDir dir("one");
  auto scene = stock_scene(5);
  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 1, 5, dir.path);
  auto files = tree(dir.path);
  std::vector<fs::path> want;
  for (const char* f : {files::kGtDepth, files::kImage, files::kIntrinsics, files::kLidar,
                        files::kPose, files::kRadar})
    want.push_back(fs::path("frame_000000") / f);
  std::sort(want.begin(), want.end());
  EXPECT_EQ(files, want);
}

TEST(GenSequence, EgoAdvancesPerFrame) {
  TempDir dir("five");
  SceneConfig scene;
  scene.ego_velocity = 5.0;
  scene.frame_interval = 0.1;
  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 5, 1, dir.path);
  for (int i = 1; i < 5; ++i) {
    auto a = read_pose_json(dir.path / frame_dir_name(i - 1) / files::kPose);
    auto b = read_pose_json(dir.path / frame_dir_name(i) / files::kPose);
    EXPECT_NEAR((b.translation() - a.translation()).norm(), 0.5, 1e-12);
    EXPECT_NEAR(b.translation().z() - a.translation().z(), 0.5, 1e-12);
  }
}

TEST(GenSequence, ByteIdenticalRegeneration) {
  TempDir a("a"), b("b"), c("c");
  auto scene = stock_scene(9);
  SensorModelConfig sensors;
  sensors.emit_mer = true;
  gen_sequence(scene, sensors, desk_intrinsics(), 4, 9, a.path);
  gen_sequence(scene, sensors, desk_intrinsics(), 4, 9, b.path);
  gen_sequence(scene, sensors, desk_intrinsics(), 4, 10, c.path);
  auto files = tree(a.path);
  ASSERT_EQ(files, tree(b.path));
  EXPECT_EQ(files.size(), 28u);
  bool any_diff = false;
  for (const auto& f : files) {
    EXPECT_EQ(slurp(a.path / f), slurp(b.path / f)) << f;
    any_diff |= slurp(a.path / f) != slurp(c.path / f);
  }
  EXPECT_TRUE(any_diff);
}

TEST(SceneConfig, Validate) {
  SceneConfig scene;
  EXPECT_NO_THROW(scene.validate());
  scene.camera_height = 0.0;
  EXPECT_THROW(scene.validate(), std::invalid_argument);
  scene = SceneConfig{};
  scene.boxes.push_back(Box::on_ground(0, 10, 0.0, 1, 1, 0.5));
  EXPECT_THROW(scene.validate(), std::invalid_argument);
  LidarConfig lidar;
  lidar.dropout = 1.5;
  EXPECT_THROW(lidar.validate(), std::invalid_argument);
  RadarConfig radar;
  radar.range_sigma = -1.0;
  EXPECT_THROW(radar.validate(), std::invalid_argument);
}

TEST(StockScene, DeterministicLayout) {
  auto a = stock_scene(11), b = stock_scene(11), c = stock_scene(12);
  ASSERT_EQ(a.boxes.size(), b.boxes.size());
  for (std::size_t i = 0; i < a.boxes.size(); ++i) EXPECT_EQ(a.boxes[i].center, b.boxes[i].center);
  EXPECT_NO_THROW(a.validate());
  bool differs = a.boxes.size() != c.boxes.size();
  for (std::size_t i = 0; !differs && i < a.boxes.size(); ++i)
    differs = a.boxes[i].center != c.boxes[i].center;
  EXPECT_TRUE(differs);
  int moving = 0;
  for (const auto& box : a.boxes) {
    EXPECT_NEAR(box.center.y(), -box.size.y() / 2, 1e-12);
    moving += box.velocity.norm() > 0;
  }
  EXPECT_GE(moving, 1);
}
