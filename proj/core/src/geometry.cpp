#include "radardepth/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace radardepth {

namespace {

constexpr double kRotationTolerance = 1e-9;

void check_rotation(const Eigen::Matrix3d& r) {
  if (!r.allFinite()) {
    throw std::invalid_argument("Se3Pose: rotation has non-finite entries");
  }
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kRotationTolerance) {
    throw std::invalid_argument("Se3Pose: rotation is not orthonormal (error " +
                                std::to_string(ortho_err) + ")");
  }
  if (std::abs(r.determinant() - 1.0) > kRotationTolerance) {
    throw std::invalid_argument("Se3Pose: rotation determinant is not +1");
  }
}

}  // namespace

Se3Pose::Se3Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  check_rotation(rotation_);
  if (!translation_.allFinite()) {
    throw std::invalid_argument("Se3Pose: translation has non-finite entries");
  }
}

Se3Pose Se3Pose::from_translation(const Eigen::Vector3d& t) {
  return Se3Pose(Eigen::Matrix3d::Identity(), t);
}

Se3Pose Se3Pose::rot_z(double radians) {
  return Se3Pose(Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitZ()).toRotationMatrix(),
                 Eigen::Vector3d::Zero());
}

Se3Pose Se3Pose::rot_y(double radians) {
  return Se3Pose(Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitY()).toRotationMatrix(),
                 Eigen::Vector3d::Zero());
}

Se3Pose Se3Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return Se3Pose(rt, -(rt * translation_), Unchecked{});
}

Se3Pose compose(const Se3Pose& a, const Se3Pose& b) {
  return Se3Pose(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_,
                 Se3Pose::Unchecked{});
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("CameraIntrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("CameraIntrinsics: principal point outside the image");
  }
}

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) {
      throw std::invalid_argument("PointCloud: non-finite coordinate");
    }
  }
  if (!range_rate.empty() && range_rate.size() != points.size()) {
    throw std::invalid_argument("PointCloud: range_rate size does not match point count");
  }
  if (!intensity.empty() && intensity.size() != points.size()) {
    throw std::invalid_argument("PointCloud: intensity size does not match point count");
  }
  if (!velocity.empty() && velocity.size() != points.size()) {
    throw std::invalid_argument("PointCloud: velocity size does not match point count");
  }
}

void PointCloud::append(const PointCloud& other) {
  // Attributes survive only if both sides carry them.
  const bool keep_rr = (points.empty() || !range_rate.empty()) && !other.range_rate.empty();
  const bool keep_in = (points.empty() || !intensity.empty()) && !other.intensity.empty();
  const bool keep_vel = (points.empty() || !velocity.empty()) && !other.velocity.empty();
  points.insert(points.end(), other.points.begin(), other.points.end());
  if (keep_rr) {
    range_rate.insert(range_rate.end(), other.range_rate.begin(), other.range_rate.end());
  } else {
    range_rate.clear();
  }
  if (keep_in) {
    intensity.insert(intensity.end(), other.intensity.begin(), other.intensity.end());
  } else {
    intensity.clear();
  }
  if (keep_vel) {
    velocity.insert(velocity.end(), other.velocity.begin(), other.velocity.end());
  } else {
    velocity.clear();
  }
}

Grid::Grid(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("Grid: negative dimensions");
  }
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

SparseDepthImage::SparseDepthImage(Grid grid) : grid_(std::move(grid)) {
  for (double d : grid_.values()) {
    if (!std::isfinite(d) || d < 0.0) {
      throw std::invalid_argument("SparseDepthImage: depth must be finite and >= 0");
    }
  }
}

void SparseDepthImage::set(int u, int v, double depth) {
  if (!std::isfinite(depth) || depth < 0.0) {
    throw std::invalid_argument("SparseDepthImage: depth must be finite and >= 0");
  }
  grid_.at(u, v) = depth;
}

std::size_t SparseDepthImage::valid_count() const {
  std::size_t n = 0;
  for (double d : grid_.values()) {
    n += d > 0.0 ? 1 : 0;
  }
  return n;
}

DenseDepthImage::DenseDepthImage(int width, int height, double fill) : grid_(width, height, fill) {
  if (!std::isfinite(fill) || !(fill > 0.0)) {
    throw std::invalid_argument("DenseDepthImage: depth must be finite and > 0");
  }
}

DenseDepthImage::DenseDepthImage(Grid grid) : grid_(std::move(grid)) {
  for (double d : grid_.values()) {
    if (!std::isfinite(d) || !(d > 0.0)) {
      throw std::invalid_argument("DenseDepthImage: depth must be finite and > 0");
    }
  }
}

void DenseDepthImage::set(int u, int v, double depth) {
  if (!std::isfinite(depth) || !(depth > 0.0)) {
    throw std::invalid_argument("DenseDepthImage: depth must be finite and > 0");
  }
  grid_.at(u, v) = depth;
}

PointCloud transform_points(const Se3Pose& pose, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p = pose.apply(p);
  }
  return out;
}

std::optional<std::pair<int, int>> project_pixel(const Eigen::Vector3d& p,
                                                 const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) {
    return std::nullopt;
  }
  const double uf = std::floor(k.fx * p.x() / p.z() + k.cx + 0.5);
  const double vf = std::floor(k.fy * p.y() / p.z() + k.cy + 0.5);
  if (!(uf >= 0.0 && uf < k.width && vf >= 0.0 && vf < k.height)) {
    return std::nullopt;
  }
  return std::make_pair(static_cast<int>(uf), static_cast<int>(vf));
}

SparseDepthImage project_to_depth(const PointCloud& cloud_cam, const CameraIntrinsics& k) {
  k.validate();
  Grid zbuf(k.width, k.height, 0.0);
  for (const auto& p : cloud_cam.points) {
    const auto px = project_pixel(p, k);
    if (!px) {
      continue;
    }
    double& cell = zbuf.at(px->first, px->second);
    if (cell == 0.0 || p.z() < cell) {
      cell = p.z();
    }
  }
  return SparseDepthImage(std::move(zbuf));
}

Eigen::Vector3d backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("backproject: depth must be positive");
  }
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

namespace {

struct ResizePlan {
  int fx;
  int fy;
};

ResizePlan plan_resize(int w, int h, int target_w, int target_h, int crop_top_rows) {
  if (target_w <= 0 || target_h <= 0 || w % target_w != 0 || h % target_h != 0) {
    throw std::invalid_argument("resize_crop: " + std::to_string(w) + "x" + std::to_string(h) +
                                " -> " + std::to_string(target_w) + "x" +
                                std::to_string(target_h) + " is not an integer downsample");
  }
  if (crop_top_rows < 0 || crop_top_rows >= target_h) {
    throw std::invalid_argument("resize_crop: crop of " + std::to_string(crop_top_rows) +
                                " rows does not fit a height of " + std::to_string(target_h));
  }
  return {w / target_w, h / target_h};
}

}  // namespace

SparseDepthImage resize_crop(const SparseDepthImage& img, int target_w, int target_h,
                             int crop_top_rows) {
  const auto plan = plan_resize(img.width(), img.height(), target_w, target_h, crop_top_rows);
  Grid out(target_w, target_h - crop_top_rows, 0.0);
  for (int v = crop_top_rows; v < target_h; ++v) {
    for (int u = 0; u < target_w; ++u) {
      double best = 0.0;
      for (int dv = 0; dv < plan.fy; ++dv) {
        for (int du = 0; du < plan.fx; ++du) {
          const double d = img.at(u * plan.fx + du, v * plan.fy + dv);
          if (d > 0.0 && (best == 0.0 || d < best)) {
            best = d;
          }
        }
      }
      out.at(u, v - crop_top_rows) = best;
    }
  }
  return SparseDepthImage(std::move(out));
}

DenseDepthImage resize_crop(const DenseDepthImage& img, int target_w, int target_h,
                            int crop_top_rows) {
  const auto plan = plan_resize(img.width(), img.height(), target_w, target_h, crop_top_rows);
  Grid out(target_w, target_h - crop_top_rows, 0.0);
  for (int v = crop_top_rows; v < target_h; ++v) {
    for (int u = 0; u < target_w; ++u) {
      out.at(u, v - crop_top_rows) = img.at(u * plan.fx + plan.fx / 2, v * plan.fy + plan.fy / 2);
    }
  }
  return DenseDepthImage(std::move(out));
}

CameraIntrinsics resize_crop(const CameraIntrinsics& k, int target_w, int target_h,
                             int crop_top_rows) {
  const auto plan = plan_resize(k.width, k.height, target_w, target_h, crop_top_rows);
  CameraIntrinsics out;
  out.fx = k.fx / plan.fx;
  out.fy = k.fy / plan.fy;
  // New pixel i covers old pixels [f*i, f*i + f); its centre is f*i + (f-1)/2.
  out.cx = (k.cx - 0.5 * (plan.fx - 1)) / plan.fx;
  out.cy = (k.cy - 0.5 * (plan.fy - 1)) / plan.fy - crop_top_rows;
  out.width = target_w;
  out.height = target_h - crop_top_rows;
  return out;
}

}  // namespace radardepth
