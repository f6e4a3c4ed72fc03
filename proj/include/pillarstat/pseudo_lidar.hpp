// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "pillarstat/ingest.hpp"

namespace pillarstat {

struct ProjectionConfig {
  double max_depth = 80.0;
  /// Pixels with disparity <= min_disparity are skipped.
  double min_disparity = 1.0;
  /// Sensor-frame vertical crop; unbounded by default.
  double z_min = -std::numeric_limits<double>::infinity();
  double z_max = std::numeric_limits<double>::infinity();

  bool valid() const { return max_depth > 0 && min_disparity >= 0 && z_min < z_max; }
};

struct PixelDepth {
  double u = 0;
  double v = 0;
  double depth = 0;
};

/// Back-projects every valid disparity pixel (row-major order) into the
/// sensor frame. v is 1.0 without a segmentation raster, else the raster
/// value at the same pixel.
template <typename Scalar = float>
PointCloudT<Scalar> disparity_to_cloud(const Raster& disparity, const Calibration& calib,
                                       const ProjectionConfig& cfg = {},
                                       const std::optional<Raster>& segmentation = std::nullopt);

/// Pinhole projection of each point in front of the camera; points at or
/// behind the image plane are omitted.
template <typename Scalar>
std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<Scalar>& cloud, const Calibration& calib);

extern template PointCloudT<float> disparity_to_cloud(const Raster&, const Calibration&,
                                                      const ProjectionConfig&, const std::optional<Raster>&);
extern template PointCloudT<double> disparity_to_cloud(const Raster&, const Calibration&,
                                                       const ProjectionConfig&, const std::optional<Raster>&);
extern template std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<float>&, const Calibration&);
extern template std::vector<PixelDepth> project_cloud_to_image(const PointCloudT<double>&, const Calibration&);

/// Depth along the optical axis for a disparity, f·b/d.
inline double disparity_to_depth(double disparity, const Calibration& calib) {
  return calib.focal_u * calib.baseline / disparity;
}

}  // namespace pillarstat
