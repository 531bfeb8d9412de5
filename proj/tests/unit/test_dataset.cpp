#include "radardepth/dataset.hpp"
#include "radardepth/synthscene.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace radardepth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("radardepth_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Pgm16, ByteLayout) {
  TempDir dir("pgm");
  Pgm16 img{2, 1, {0x0102, 0xFFFE}};
  write_pgm16(dir.path / "a.pgm", img);
  std::string bytes = slurp(dir.path / "a.pgm");
  EXPECT_EQ(bytes, std::string("P5\n2 1\n65535\n\x01\x02\xFF\xFE", 17));
  auto back = read_pgm16(dir.path / "a.pgm");
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Pgm16, GrayRoundTrip) {
  TempDir dir("gray");
  oracle::Rng rng(1);
  Grid g(7, 5);
  for (double& x : g.values()) x = oracle::uniform(rng, 0, 1);
  g.at(0, 0) = 0.5;
  write_gray_image(dir.path / "g.pgm", g);
  auto raw = read_pgm16(dir.path / "g.pgm");
  EXPECT_EQ(raw.pixels[0], 32768);
  auto back = read_gray_image(dir.path / "g.pgm");
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back[i], g[i], 0.5 / 65535 + 1e-15);
}

TEST(Pfm, ByteLayoutAndRoundTrip) {
  TempDir dir("pfm");
  Grid g(2, 2);
  g.at(0, 0) = 1.0;
  g.at(1, 0) = 2.0;
  g.at(0, 1) = 3.0;
  g.at(1, 1) = 4.5;
  write_pfm(dir.path / "d.pfm", g);
  std::string bytes = slurp(dir.path / "d.pfm");
  std::string header = "Pf\n2 2\n-1.0\n";
  ASSERT_EQ(bytes.size(), header.size() + 16);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  // Bottom row first, little-endian float32.
  float first;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 3.0f);
  EXPECT_EQ(read_pfm(dir.path / "d.pfm"), g);

  spit(dir.path / "big.pfm", "Pf\n1 1\n1.0\n\0\0\0\0");
  EXPECT_NE(error_of([&] { read_pfm(dir.path / "big.pfm"); }).find("big.pfm"), std::string::npos);
  spit(dir.path / "short.pfm", "Pf\n4 4\n-1.0\n\0\0");
  EXPECT_NE(error_of([&] { read_pfm(dir.path / "short.pfm"); }).find("short.pfm"),
            std::string::npos);
}

TEST(CloudCsv, RoundTripWithAndWithoutVelocity) {
  TempDir dir("csv");
  oracle::Rng rng(2);
  PointCloud c;
  for (int i = 0; i < 20; ++i)
    c.points.emplace_back(oracle::uniform(rng, -10, 10), oracle::uniform(rng, -3, 3),
                          oracle::uniform(rng, 0, 80));
  write_cloud_csv(dir.path / "p.csv", c);
  EXPECT_EQ(slurp(dir.path / "p.csv").substr(0, 6), "x,y,z\n");
  auto back = read_cloud_csv(dir.path / "p.csv");
  EXPECT_EQ(back.points, c.points);
  EXPECT_TRUE(back.velocity.empty());

  for (int i = 0; i < 20; ++i) c.velocity.emplace_back(oracle::uniform(rng, -5, 5), -1.25);
  write_cloud_csv(dir.path / "v.csv", c);
  EXPECT_EQ(slurp(dir.path / "v.csv").substr(0, 11), "x,y,z,vx,vy");
  back = read_cloud_csv(dir.path / "v.csv");
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.velocity, c.velocity);

  PointCloud empty;
  write_cloud_csv(dir.path / "e.csv", empty);
  EXPECT_TRUE(read_cloud_csv(dir.path / "e.csv").empty());

  spit(dir.path / "bad.csv", "x,y,z\n1,2\n");
  auto msg = error_of([&] { read_cloud_csv(dir.path / "bad.csv"); });
  EXPECT_NE(msg.find("bad.csv"), std::string::npos);
  EXPECT_NE(msg.find("line 2"), std::string::npos);
  spit(dir.path / "nan.csv", "x,y,z\n1,zz,3\n");
  EXPECT_NE(error_of([&] { read_cloud_csv(dir.path / "nan.csv"); }).find("nan.csv"),
            std::string::npos);
}

TEST(Json, PoseAndIntrinsics) {
  TempDir dir("json");
  Se3Pose p(Se3Pose::rot_y(0.3).rotation(), {1.5, -2.0, 3.25});
  write_pose_json(dir.path / "pose.json", p);
  auto q = read_pose_json(dir.path / "pose.json");
  EXPECT_EQ(q.rotation(), p.rotation());
  EXPECT_EQ(q.translation(), p.translation());

  CameraIntrinsics k = desk_intrinsics();
  write_intrinsics_json(dir.path / "k.json", k);
  auto k2 = read_intrinsics_json(dir.path / "k.json");
  EXPECT_EQ(k2.fx, k.fx);
  EXPECT_EQ(k2.cy, k.cy);
  EXPECT_EQ(k2.width, k.width);

  spit(dir.path / "broken.json", "{\"rotation\": [1,0,0]");
  EXPECT_NE(error_of([&] { read_pose_json(dir.path / "broken.json"); }).find("broken.json"),
            std::string::npos);
  EXPECT_NE(error_of([&] { read_pose_json(dir.path / "missing.json"); }).find("missing.json"),
            std::string::npos);
}

TEST(MerCsv, RoundTrip) {
  TempDir dir("mer");
  MerMap m(4, 3);
  m.add(1, 2, {10.5, 0.75});
  m.add(1, 2, {11.0, 0.5});
  m.add(3, 0, {42.0, 1.0});
  write_mer_csv(dir.path / "m.csv", m);
  auto back = read_mer_csv(dir.path / "m.csv", 4, 3);
  ASSERT_EQ(back.entries(1, 2).size(), 2u);
  EXPECT_EQ(back.entries(1, 2)[1].depth, 11.0);
  EXPECT_EQ(back.entries(3, 0)[0].pda, 1.0);
  EXPECT_TRUE(back.entries(0, 0).empty());
  spit(dir.path / "oob.csv", "u,v,depth,pda\n9,0,1.0,0.5\n");
  EXPECT_NE(error_of([&] { read_mer_csv(dir.path / "oob.csv", 4, 3); }).find("oob.csv"),
            std::string::npos);
}

TEST(EmitDepthImage, Quantisation) {
  EXPECT_EQ(depth_to_u16(80.0, 80.0), 65535);
  EXPECT_EQ(depth_to_u16(120.0, 80.0), 65535);
  EXPECT_EQ(depth_to_u16(0.0, 80.0), 0);
  EXPECT_EQ(depth_to_u16(40.0, 80.0), 32768);
  EXPECT_THROW(depth_to_u16(1.0, 0.0), std::invalid_argument);

  TempDir dir("emit");
  Grid d(3, 1);
  d.at(0, 0) = 0.0;
  d.at(1, 0) = 40.0;
  d.at(2, 0) = 80.0;
  emit_depth_image(d, dir.path / "d.pgm", 80.0);
  EXPECT_EQ(read_pgm16(dir.path / "d.pgm").pixels, (std::vector<std::uint16_t>{0, 32768, 65535}));
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_bytes(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_bytes("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir dir("sha");
  spit(dir.path / "abc", "abc");
  EXPECT_EQ(sha256_file(dir.path / "abc"), sha256_bytes("abc"));
}

TEST(Dataset, FlatAndNestedLayouts) {
  TempDir flat("flat"), nested("nested");
  auto scene = stock_scene(4);
  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 3, 4, flat.path);
  auto ds = Dataset::open(flat.path);
  ASSERT_EQ(ds.frames().size(), 3u);
  EXPECT_EQ(ds.sequence_count(), 1);
  EXPECT_EQ(ds.frames()[2].id, "frame_000002");

  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 2, 4, nested.path / "seq_b");
  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 3, 5, nested.path / "seq_a");
  auto nd = Dataset::open(nested.path);
  ASSERT_EQ(nd.frames().size(), 5u);
  EXPECT_EQ(nd.sequence_count(), 2);
  EXPECT_EQ(nd.frames()[0].id, "seq_a/frame_000000");
  EXPECT_EQ(nd.frames()[3].id, "seq_b/frame_000000");
  EXPECT_EQ(nd.frames()[3].sequence, 1);
  EXPECT_EQ(nd.frames()[3].index, 0);

  auto hist = nd.history(nd.frames()[2], 5);
  ASSERT_EQ(hist.size(), 3u);
  EXPECT_EQ(hist.front()->id, "seq_a/frame_000000");
  EXPECT_EQ(hist.back()->id, "seq_a/frame_000002");
  EXPECT_EQ(nd.history(nd.frames()[3], 5).size(), 1u);

  EXPECT_EQ(nd.all_files().size(), 30u);
  EXPECT_THROW(Dataset::open(nested.path / "nope"), std::runtime_error);
  fs::create_directories(flat.path / "empty");
  EXPECT_THROW(Dataset::open(flat.path / "empty"), std::runtime_error);
}

TEST(Dataset, FrameReaderLogsAccess) {
  TempDir dir("log");
  auto scene = stock_scene(6);
  gen_sequence(scene, SensorModelConfig{}, desk_intrinsics(), 1, 6, dir.path);
  auto ds = Dataset::open(dir.path);
  AccessLog log;
  FrameReader reader(&log);
  log.set_phase("load");
  const auto& f = ds.frames()[0];
  auto img = reader.image(f);
  auto gt = reader.gt_depth(f);
  EXPECT_EQ(img.width(), 200);
  EXPECT_EQ(gt.height(), 88);
  EXPECT_FALSE(reader.has_mer(f));
  RadarOnlyFrameView view(reader, f);
  EXPECT_FALSE(view.radar().empty());
  auto entries = log.entries();
  ASSERT_GE(entries.size(), 3u);
  EXPECT_EQ(entries[0].phase, "load");
  EXPECT_EQ(entries[0].frame, "frame_000000");
  EXPECT_EQ(entries[0].file, files::kImage);
  EXPECT_EQ(entries.back().file, files::kRadar);
}

TEST(WriteFrame, MerOnlyWhenPresent) {
  TempDir dir("frame");
  FrameRecord rec;
  rec.image = Grid(4, 2, 0.5);
  rec.gt_depth = DenseDepthImage(4, 2, 3.0);
  rec.intrinsics = {2, 2, 2, 1, 4, 2};
  write_frame(dir.path / "f", rec);
  EXPECT_FALSE(fs::exists(dir.path / "f" / files::kMer));
  rec.mer = MerMap(4, 2);
  rec.mer->add(0, 0, {5.0, 0.9});
  write_frame(dir.path / "g", rec);
  EXPECT_TRUE(fs::exists(dir.path / "g" / files::kMer));
}
