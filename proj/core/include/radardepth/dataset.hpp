#pragma once

#include "radardepth/geometry.hpp"
#include "radardepth/radar_prep.hpp"

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace radardepth {

// ---------------------------------------------------------------------------
// File formats. Every reader throws std::runtime_error naming the file.

struct Pgm16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

/// Binary PGM (P5) with maxval 65535, samples big-endian.
void write_pgm16(const std::filesystem::path& path, const Pgm16& image);
Pgm16 read_pgm16(const std::filesystem::path& path);

/// Grayscale in [0, 1] stored as 16-bit PGM (value = round(65535 · clamp(i))).
void write_gray_image(const std::filesystem::path& path, const Grid& gray);
Grid read_gray_image(const std::filesystem::path& path);

/// PFM ("Pf"), scale −1.0 (little-endian), rows stored bottom-to-top.
void write_pfm(const std::filesystem::path& path, const Grid& values);
Grid read_pfm(const std::filesystem::path& path);

/// `x,y,z` header, plus `vx,vy` when the cloud carries velocity.
void write_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_csv(const std::filesystem::path& path);

/// {"rotation": 9 row-major floats, "translation": 3 floats}
void write_pose_json(const std::filesystem::path& path, const Se3Pose& pose);
Se3Pose read_pose_json(const std::filesystem::path& path);

/// {"fx","fy","cx","cy","width","height"}
void write_intrinsics_json(const std::filesystem::path& path, const CameraIntrinsics& k);
CameraIntrinsics read_intrinsics_json(const std::filesystem::path& path);

/// `u,v,depth,pda` rows, one per MER entry.
void write_mer_csv(const std::filesystem::path& path, const MerMap& mer);
MerMap read_mer_csv(const std::filesystem::path& path, int width, int height);

/// round(65535 · min(depth, max_depth) / max_depth), half rounding up.
std::uint16_t depth_to_u16(double depth, double max_depth);

/// 16-bit grayscale visualisation of a depth map.
void emit_depth_image(const Grid& depth, const std::filesystem::path& path, double max_depth);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::string& bytes);

// ---------------------------------------------------------------------------
// Dataset layout: <root>/frame_NNNNNN/ for a single sequence, or
// <root>/<sequence>/frame_NNNNNN/ for several.

namespace files {
inline constexpr const char* kImage = "image.pgm";
inline constexpr const char* kGtDepth = "gt_depth.pfm";
inline constexpr const char* kLidar = "lidar.csv";
inline constexpr const char* kRadar = "radar.csv";
inline constexpr const char* kPose = "pose.json";
inline constexpr const char* kIntrinsics = "intrinsics.json";
inline constexpr const char* kMer = "mer.csv";
}  // namespace files

/// Everything a generator writes for one frame. Point clouds are in the
/// camera frame; `pose` is camera → global.
struct FrameRecord {
  Grid image;
  PointCloud lidar;
  PointCloud radar;
  Se3Pose pose;
  CameraIntrinsics intrinsics;
  DenseDepthImage gt_depth;
  std::optional<MerMap> mer;
  int frame_index = 0;
};

std::string frame_dir_name(int frame_index);
void write_frame(const std::filesystem::path& frame_dir, const FrameRecord& frame);

struct FrameRef {
  std::string id;  // path relative to the dataset root, '/' separated
  std::filesystem::path dir;
  int sequence = 0;
  int index = 0;  // position within its sequence
};

class Dataset {
 public:
  /// Throws std::runtime_error when the root has no frame directories.
  static Dataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<FrameRef>& frames() const { return frames_; }
  int sequence_count() const { return sequence_count_; }

  /// Frames of the same sequence with index in [index − (count − 1), index], oldest first.
  std::vector<const FrameRef*> history(const FrameRef& frame, int count) const;
  /// Every regular file under the root, sorted, relative to the root.
  std::vector<std::filesystem::path> all_files() const;

 private:
  std::filesystem::path root_;
  std::vector<FrameRef> frames_;
  int sequence_count_ = 0;
};

/// Records which dataset files are opened, tagged with the current phase.
class AccessLog {
 public:
  struct Entry {
    std::string phase;
    std::string frame;
    std::string file;
  };

  void set_phase(std::string phase);
  void record(const std::string& frame, const std::string& file);
  std::vector<Entry> entries() const;

 private:
  mutable std::mutex mutex_;
  std::string phase_;
  std::vector<Entry> entries_;
};

/// Per-file frame accessors; every read goes through the access log when one is set.
class FrameReader {
 public:
  explicit FrameReader(AccessLog* log = nullptr) : log_(log) {}

  Grid image(const FrameRef& f) const;
  DenseDepthImage gt_depth(const FrameRef& f) const;
  PointCloud lidar(const FrameRef& f) const;
  PointCloud radar(const FrameRef& f) const;
  Se3Pose pose(const FrameRef& f) const;
  CameraIntrinsics intrinsics(const FrameRef& f) const;
  bool has_mer(const FrameRef& f) const;
  MerMap mer(const FrameRef& f) const;

 private:
  std::filesystem::path touch(const FrameRef& f, const char* file) const;
  AccessLog* log_;
};

/// A frame view with no lidar accessor: the only data a radar-supervised
/// training loader may see.
class RadarOnlyFrameView {
 public:
  RadarOnlyFrameView(const FrameReader& reader, const FrameRef& frame)
      : reader_(&reader), frame_(&frame) {}

  const FrameRef& ref() const { return *frame_; }
  /// The same restricted view of another frame (e.g. a previous sweep).
  RadarOnlyFrameView at(const FrameRef& other) const { return {*reader_, other}; }
  Grid image() const { return reader_->image(*frame_); }
  PointCloud radar() const { return reader_->radar(*frame_); }
  Se3Pose pose() const { return reader_->pose(*frame_); }
  CameraIntrinsics intrinsics() const { return reader_->intrinsics(*frame_); }
  bool has_mer() const { return reader_->has_mer(*frame_); }
  MerMap mer() const { return reader_->mer(*frame_); }

 private:
  const FrameReader* reader_;
  const FrameRef* frame_;
};

}  // namespace radardepth
