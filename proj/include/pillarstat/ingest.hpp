// SPDX-License-Identifier: Apache-2.0
//
// Readers (and the matching writers) for the on-disk formats: KITTI velodyne
// binaries, calib text, object label text, and single-channel PNG rasters.
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pillarstat/box_geom.hpp"

namespace pillarstat {

/// N×4 rows of (x, y, z, v) with v in [0, 1]: reflectivity for LiDAR,
/// otherwise a segmentation score (1 when absent). Files hold float; double is used
/// where projection round trips need the extra precision.
template <typename Scalar>
struct PointCloudT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>;

  Matrix points{0, 4};
  std::size_t dropped_non_finite = 0;
  std::size_t clamped_v = 0;

  Eigen::Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }

  template <typename Other>
  PointCloudT<Other> cast() const {
    PointCloudT<Other> out;
    out.points = points.template cast<Other>();
    out.dropped_non_finite = dropped_non_finite;
    out.clamped_v = clamped_v;
    return out;
  }
};

using PointCloud = PointCloudT<float>;
using PointMatrix = PointCloud::Matrix;

PointCloud make_cloud(const std::vector<Eigen::Vector4f>& rows);

PointCloud read_point_cloud(const std::filesystem::path& path);
/// Decodes an in-memory velodyne buffer; same rules as read_point_cloud.
PointCloud decode_point_cloud(const std::string& bytes);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

struct Calibration {
  double focal_u = 0, focal_v = 0, center_u = 0, center_v = 0;
  double baseline = 0.54;
  /// Full 3×4 left color camera projection (rectified camera -> pixels).
  Eigen::Matrix<double, 3, 4> projection = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix4d rect = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d velo_to_cam = Eigen::Matrix4d::Identity();

  /// Sensor frame -> rectified camera frame.
  Eigen::Matrix4d to_camera() const { return rect * velo_to_cam; }
  Eigen::Matrix4d to_sensor() const;

  bool valid() const;

  /// Intrinsics of a typical KITTI frame with an ideal axis permutation
  /// between sensor and camera frames. Used when no calib file is supplied.
  static Calibration nominal();
  /// Pinhole with the given intrinsics and identity transforms.
  static Calibration pinhole(double focal, double cu, double cv, double baseline);
};

/// `fallback_baseline` is used when the file has no P3 entry.
Calibration read_calibration(const std::filesystem::path& path, double fallback_baseline = 0.54);
Calibration parse_calibration(const std::string& text, double fallback_baseline = 0.54);

/// One line of a KITTI label file. The raw camera-frame fields are kept so
/// a record can be written back unchanged; `box3d` is in the sensor frame.
struct LabeledObject {
  std::string class_name;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  Rect2D box2d;
  double dim_h = 1, dim_w = 1, dim_l = 1;
  Eigen::Vector3d location_cam = Eigen::Vector3d::Zero();  // bottom center
  double rotation_y = 0;
  Box3D box3d;
  std::optional<double> score;

  bool is_dont_care() const { return class_name == "DontCare"; }
};

Box3D camera_label_to_box(const Eigen::Vector3d& bottom_center_cam, double h, double w, double l,
                          double rotation_y, const Calibration& calib);

/// Inverse of camera_label_to_box; fills dims, location_cam, rotation_y, alpha.
void box_to_camera_label(const Box3D& box, const Calibration& calib, LabeledObject& out);

/// Tight pixel box of the projected corners, clipped to the image. Returns
/// nullopt when the box is entirely behind the camera.
std::optional<Rect2D> project_box_to_image(const Box3D& box, const Calibration& calib,
                                           double image_width = 1242, double image_height = 375);

/// `calib` defaults to Calibration::nominal() for the camera->sensor step.
std::vector<LabeledObject> read_labels(const std::filesystem::path& path, bool with_scores,
                                       const std::optional<Calibration>& calib = std::nullopt);
std::vector<LabeledObject> parse_labels(const std::string& text, bool with_scores,
                                        const std::optional<Calibration>& calib = std::nullopt);
std::string format_label(const LabeledObject& obj);
void write_labels(const std::filesystem::path& path, const std::vector<LabeledObject>& objs);

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
};

/// Single-channel 8/16-bit PNG; each value is stored / scale.
Raster read_raster(const std::filesystem::path& path, double scale);
/// Writes stored values as a grayscale PNG of the requested depth.
void write_raster_png(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint16_t>& stored, int bit_depth);

std::string read_file(const std::filesystem::path& path);

}  // namespace pillarstat
