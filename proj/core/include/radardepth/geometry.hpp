#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace radardepth {

/// Rigid transform x -> R x + t. Camera frames follow +x right, +y down,
/// +z forward; the global frame uses the same axes with its origin on the
/// ground plane, so world height is -y.
class Se3Pose {
 public:
  Se3Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  /// Throws std::invalid_argument unless rotation is orthonormal with det +1 (1e-9).
  Se3Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Se3Pose identity() { return {}; }
  static Se3Pose from_translation(const Eigen::Vector3d& t);
  static Se3Pose rot_z(double radians);
  static Se3Pose rot_y(double radians);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }
  Se3Pose inverse() const;

 private:
  struct Unchecked {};
  Se3Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, Unchecked)
      : rotation_(r), translation_(t) {}
  friend Se3Pose compose(const Se3Pose& a, const Se3Pose& b);

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// (a ∘ b)(x) = a(b(x)).
Se3Pose compose(const Se3Pose& a, const Se3Pose& b);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument on non-positive focal lengths or a
  /// principal point outside the image.
  void validate() const;
};

/// Points plus optional per-point attributes. Attribute vectors are either
/// empty or exactly as long as `points`.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> range_rate;
  std::vector<double> intensity;
  /// Planar velocity (lateral, longitudinal) in m/s; serialised as vx,vy.
  std::vector<Eigen::Vector2d> velocity;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void validate() const;
  void append(const PointCloud& other);
};

/// Row-major H×W grid of doubles.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double& at(int u, int v) { return values_[index(u, v)]; }
  double at(int u, int v) const { return values_[index(u, v)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Depth map where 0 marks an invalid pixel.
class SparseDepthImage {
 public:
  SparseDepthImage() = default;
  SparseDepthImage(int width, int height) : grid_(width, height, 0.0) {}
  /// Throws std::invalid_argument on negative or non-finite values.
  explicit SparseDepthImage(Grid grid);

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  double at(int u, int v) const { return grid_.at(u, v); }
  void set(int u, int v, double depth);
  bool valid(int u, int v) const { return grid_.at(u, v) > 0.0; }
  std::size_t valid_count() const;
  const Grid& grid() const { return grid_; }

  friend bool operator==(const SparseDepthImage&, const SparseDepthImage&) = default;

 private:
  Grid grid_;
};

/// Depth map where every pixel is a finite positive depth.
class DenseDepthImage {
 public:
  DenseDepthImage() = default;
  DenseDepthImage(int width, int height, double fill);
  /// Throws std::invalid_argument unless every value is finite and > 0.
  explicit DenseDepthImage(Grid grid);

  int width() const { return grid_.width(); }
  int height() const { return grid_.height(); }
  double at(int u, int v) const { return grid_.at(u, v); }
  void set(int u, int v, double depth);
  const Grid& grid() const { return grid_; }

  /// Every pixel becomes a valid sample.
  SparseDepthImage to_sparse() const { return SparseDepthImage(grid_); }

  friend bool operator==(const DenseDepthImage&, const DenseDepthImage&) = default;

 private:
  Grid grid_;
};

PointCloud transform_points(const Se3Pose& pose, const PointCloud& cloud);

/// Pixel index of a camera-frame point, rounding half up; nullopt when z <= 0
/// or the pixel falls outside the image.
std::optional<std::pair<int, int>> project_pixel(const Eigen::Vector3d& p,
                                                 const CameraIntrinsics& k);

/// Z-buffered rasterization of camera-frame points (nearest depth wins).
SparseDepthImage project_to_depth(const PointCloud& cloud_cam, const CameraIntrinsics& k);

/// Throws std::invalid_argument when depth <= 0.
Eigen::Vector3d backproject(double u, double v, double depth, const CameraIntrinsics& k);

/// Integer-factor nearest-neighbour downsample, then drop the top rows.
/// Sparse cells keep their smallest valid depth.
SparseDepthImage resize_crop(const SparseDepthImage& img, int target_w, int target_h,
                             int crop_top_rows);
DenseDepthImage resize_crop(const DenseDepthImage& img, int target_w, int target_h,
                            int crop_top_rows);

/// Intrinsics after the same resize_crop.
CameraIntrinsics resize_crop(const CameraIntrinsics& k, int target_w, int target_h,
                             int crop_top_rows);

}  // namespace radardepth
