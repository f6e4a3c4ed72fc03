// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/pseudo_lidar.hpp"

#include <fmt/format.h>

#include "pillarstat/error.hpp"

namespace pillarstat {

template <typename Scalar>
PointCloudT<Scalar> disparity_to_cloud(const Raster& disparity, const Calibration& calib,
                                       const ProjectionConfig& cfg, const std::optional<Raster>& segmentation) {
  if (!cfg.valid()) throw Error(ErrorKind::InvalidArgument, "invalid projection config");
  if (!calib.valid()) throw Error(ErrorKind::InvalidArgument, "invalid calibration");
  if (segmentation &&
      (segmentation->width != disparity.width || segmentation->height != disparity.height)) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("segmentation {}x{} vs disparity {}x{}", segmentation->width,
                            segmentation->height, disparity.width, disparity.height));
  }

  // Solving P·[x y z 1]ᵀ = Z·[u v 1]ᵀ for the rectified point at depth Z.
  const auto& P = calib.projection;
  const Eigen::Matrix4d to_sensor = calib.to_sensor();

  PointCloudT<Scalar> cloud;
  cloud.points.resize(Eigen::Index(disparity.values.size()), 4);
  Eigen::Index n = 0;
  for (int v = 0; v < disparity.height; ++v) {
    for (int u = 0; u < disparity.width; ++u) {
      const double d = disparity.at(u, v);
      if (!(d > cfg.min_disparity)) continue;
      const double depth = disparity_to_depth(d, calib);
      if (depth > cfg.max_depth) continue;

      const double z = depth - P(2, 3);
      const double x = (u * depth - P(0, 2) * z - P(0, 3)) / P(0, 0);
      const double y = (v * depth - P(1, 2) * z - P(1, 3)) / P(1, 1);
      const Eigen::Vector4d sensor = to_sensor * Eigen::Vector4d(x, y, z, 1);
      if (sensor.z() < cfg.z_min || sensor.z() > cfg.z_max) continue;

      double value = 1.0;
      if (segmentation) {
        const double s = segmentation->at(u, v);
        if (!(s >= 0.0 && s <= 1.0)) {
          throw Error(ErrorKind::InvalidArgument,
                      fmt::format("segmentation value {} at ({}, {}) outside [0, 1]", s, u, v));
        }
        value = s;
      }
      cloud.points.row(n++) = Eigen::Vector4d(sensor.x(), sensor.y(), sensor.z(), value).cast<Scalar>().transpose();
    }
  }
  cloud.points.conservativeResize(n, 4);
  return cloud;
}

template <typename Scalar>
std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<Scalar>& cloud, const Calibration& calib) {
  const Eigen::Matrix<double, 3, 4> full = calib.projection * calib.to_camera();
  std::vector<PixelDepth> out;
  out.reserve(static_cast<std::size_t>(cloud.size()));
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector4d p(double(cloud.points(i, 0)), double(cloud.points(i, 1)), double(cloud.points(i, 2)), 1.0);
    const Eigen::Vector3d h = full * p;
    if (!(h.z() > 0)) continue;
    out.push_back({h.x() / h.z(), h.y() / h.z(), h.z()});
  }
  return out;
}

template PointCloudT<float> disparity_to_cloud(const Raster&, const Calibration&, const ProjectionConfig&,
                                               const std::optional<Raster>&);
template PointCloudT<double> disparity_to_cloud(const Raster&, const Calibration&, const ProjectionConfig&,
                                                const std::optional<Raster>&);
template std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<float>&, const Calibration&);
template std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<double>&, const Calibration&);

}  // namespace pillarstat
