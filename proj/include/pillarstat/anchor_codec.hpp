// SPDX-License-Identifier: Apache-2.0
//
// Prior boxes, training-target assignment, and the residual box coding.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pillarstat/box_geom.hpp"
#include "pillarstat/ingest.hpp"
#include "pillarstat/pillar_encoder.hpp"

namespace pillarstat {

struct AnchorConfig {
  std::string class_name = "Car";
  double width = 1.6;
  double length = 3.9;
  double height = 1.56;
  std::vector<double> yaws{0.0, kPi<double> / 2};
  double z_center = -1.0;
  int stride = 2;
  double pos_iou = 0.6;
  double neg_iou = 0.45;

  void validate() const;
};

struct AnchorSet {
  std::vector<Box3D> boxes;
  /// Axis-aligned BEV footprints, parallel to `boxes`.
  std::vector<Rect2D> footprints;
  int rows = 0;
  int cols = 0;
  int yaws = 0;

  std::size_t size() const { return boxes.size(); }
};

/// One anchor per (strided cell, yaw); row-major over cells, yaw fastest.
AnchorSet generate_anchors(const PillarGridConfig& grid, const AnchorConfig& cfg);

using BoxResidual = Eigen::Matrix<double, 7, 1>;  // dx dy dz dw dl dh dtheta

enum class AnchorLabel : std::int8_t { Ignored = -1, Negative = 0, Positive = 1 };

struct TargetAssignment {
  std::vector<AnchorLabel> labels;
  /// Matched gt per anchor, -1 unless positive.
  std::vector<int> gt_index;
  /// Zero rows for non-positive anchors.
  Eigen::Matrix<double, Eigen::Dynamic, 7, Eigen::RowMajor> regression;
  std::vector<std::int8_t> direction;

  std::size_t size() const { return labels.size(); }
  std::size_t num_positive() const;
};

/// 1 iff the yaw lies in [0, pi) after normalization.
int direction_bit(double yaw);

/// Yaw residual is sin of the heading difference folded into [-pi/2, pi/2];
/// equal to sin(gt - anchor) whenever they are less than pi/2 apart.
BoxResidual encode_box(const Box3D& gt, const Box3D& anchor);
/// Throws NonFinitePrediction on any non-finite input.
Box3D decode_box(const BoxResidual& pred, const Box3D& anchor, int direction);

TargetAssignment assign_targets(const AnchorSet& anchors, const std::vector<Box3D>& gts,
                                const AnchorConfig& cfg);
TargetAssignment assign_targets(const AnchorSet& anchors, const std::vector<LabeledObject>& gts,
                                const AnchorConfig& cfg);

// TGT1: "TGT1", "N\n", then per anchor i8 label, 7 f32 regression, i8 direction.
std::string serialize_tgt1(const TargetAssignment& t);
void write_tgt1(const std::filesystem::path& path, const TargetAssignment& t);
TargetAssignment read_tgt1(const std::filesystem::path& path);

/// Raw per-anchor network output: score, 7 residuals, direction logit.
struct Predictions {
  Eigen::Matrix<float, Eigen::Dynamic, 9, Eigen::RowMajor> values;
  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

// PRD1: "PRD1", "N\n", then N×9 little-endian f32 rows.
std::string serialize_prd1(const Predictions& p);
void write_prd1(const std::filesystem::path& path, const Predictions& p);
Predictions read_prd1(const std::filesystem::path& path);

struct DecodeConfig {
  double score_floor = 0.05;
  double nms_iou = 0.5;
};

/// Score floor, residual decoding, then rotated NMS.
std::vector<Detection> decode_predictions(const Predictions& preds, const AnchorSet& anchors,
                                          const AnchorConfig& anchor_cfg, const DecodeConfig& cfg);

}  // namespace pillarstat
