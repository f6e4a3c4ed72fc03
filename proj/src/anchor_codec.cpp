// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/anchor_codec.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "pillarstat/error.hpp"

namespace pillarstat {

void AnchorConfig::validate() const {
  if (!(width > 0 && length > 0 && height > 0)) throw Error(ErrorKind::ConfigError, "anchor dims must be positive");
  if (!(0 <= neg_iou && neg_iou <= pos_iou && pos_iou <= 1)) {
    throw Error(ErrorKind::ConfigError, "need 0 <= anchor.neg_iou <= anchor.pos_iou <= 1");
  }
  if (stride < 1) throw Error(ErrorKind::ConfigError, "anchor.stride must be >= 1");
  if (yaws.empty()) throw Error(ErrorKind::ConfigError, "anchor.yaws is empty");
}

AnchorSet generate_anchors(const PillarGridConfig& grid, const AnchorConfig& cfg) {
  grid.validate();
  cfg.validate();
  AnchorSet set;
  set.rows = grid.height() / cfg.stride;
  set.cols = grid.width() / cfg.stride;
  set.yaws = static_cast<int>(cfg.yaws.size());
  if (set.rows < 1 || set.cols < 1) throw Error(ErrorKind::ConfigError, "anchor.stride exceeds the grid");

  const double step = cfg.stride * grid.cell;
  set.boxes.reserve(std::size_t(set.rows) * set.cols * set.yaws);
  for (int r = 0; r < set.rows; ++r) {
    for (int c = 0; c < set.cols; ++c) {
      for (double yaw : cfg.yaws) {
        Box3D b;
        b.center = {grid.x_min + (c + 0.5) * step, grid.y_min + (r + 0.5) * step, cfg.z_center};
        b.length = cfg.length;
        b.width = cfg.width;
        b.height = cfg.height;
        b.yaw = normalize_angle(yaw);
        set.boxes.push_back(b);
      }
    }
  }
  set.footprints.reserve(set.boxes.size());
  for (const auto& b : set.boxes) set.footprints.push_back(nearest_standup_footprint(b));
  return set;
}

int direction_bit(double yaw) {
  const double y = normalize_angle(yaw);
  return (y >= 0 && y < kPi<double>) ? 1 : 0;
}

namespace {

// Heading difference folded into [-pi/2, pi/2]; the direction bit carries the
// half turn. Plain sin(gt - anchor) would mirror headings more than pi/2 away.
double folded_yaw_delta(double gt, double anchor) {
  double d = normalize_angle(gt - anchor);
  if (d > kPi<double> / 2) d -= kPi<double>;
  if (d < -kPi<double> / 2) d += kPi<double>;
  return d;
}

}  // namespace

BoxResidual encode_box(const Box3D& gt, const Box3D& anchor) {
  const double diag = std::hypot(anchor.width, anchor.length);
  BoxResidual r;
  r << (gt.center.x() - anchor.center.x()) / diag, (gt.center.y() - anchor.center.y()) / diag,
      (gt.center.z() - anchor.center.z()) / anchor.height, std::log(gt.width / anchor.width),
      std::log(gt.length / anchor.length), std::log(gt.height / anchor.height), std::sin(folded_yaw_delta(gt.yaw, anchor.yaw));
  return r;
}

Box3D decode_box(const BoxResidual& pred, const Box3D& anchor, int direction) {
  if (!pred.allFinite()) throw Error(ErrorKind::NonFinitePrediction, "regression contains NaN/Inf");
  const double diag = std::hypot(anchor.width, anchor.length);
  Box3D b;
  b.center = {anchor.center.x() + pred[0] * diag, anchor.center.y() + pred[1] * diag,
              anchor.center.z() + pred[2] * anchor.height};
  b.width = anchor.width * std::exp(pred[3]);
  b.length = anchor.length * std::exp(pred[4]);
  b.height = anchor.height * std::exp(pred[5]);
  double yaw = normalize_angle(anchor.yaw + std::asin(std::clamp(pred[6], -1.0, 1.0)));
  if (direction_bit(yaw) != (direction != 0 ? 1 : 0)) yaw = normalize_angle(yaw + kPi<double>);
  b.yaw = yaw;
  if (!b.center.allFinite() || !(b.width > 0 && b.length > 0 && b.height > 0) || !std::isfinite(b.width * b.length * b.height)) {
    throw Error(ErrorKind::NonFinitePrediction, "decoded box is not finite");
  }
  return b;
}

std::size_t TargetAssignment::num_positive() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), AnchorLabel::Positive));
}

TargetAssignment assign_targets(const AnchorSet& anchors, const std::vector<Box3D>& gts,
                                const AnchorConfig& cfg) {
  const std::size_t n = anchors.size();
  TargetAssignment t;
  t.labels.assign(n, AnchorLabel::Negative);
  t.gt_index.assign(n, -1);
  t.regression.setZero(Eigen::Index(n), 7);
  t.direction.assign(n, 0);
  if (gts.empty()) return t;

  std::vector<Rect2D> gt_rects;
  gt_rects.reserve(gts.size());
  for (const auto& g : gts) gt_rects.push_back(nearest_standup_footprint(g));

  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best_iou(gts.size(), 0.0);
  std::vector<std::size_t> gt_best_anchor(gts.size(), 0);

  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = iou_2d_axis_aligned(anchors.footprints[a], gt_rects[g]);
      if (iou > best_iou[a]) {  // strict: lowest gt index wins ties
        best_iou[a] = iou;
        best_gt[a] = int(g);
      }
      if (iou > gt_best_iou[g]) {  // strict: lowest anchor index wins ties
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = a;
      }
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (best_gt[a] >= 0 && best_iou[a] >= cfg.pos_iou) {
      t.labels[a] = AnchorLabel::Positive;
      t.gt_index[a] = best_gt[a];
    } else if (best_iou[a] >= cfg.neg_iou) {
      t.labels[a] = AnchorLabel::Ignored;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best_iou[g] <= 0) continue;
    const std::size_t a = gt_best_anchor[g];
    t.labels[a] = AnchorLabel::Positive;
    t.gt_index[a] = int(g);
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (t.labels[a] != AnchorLabel::Positive) continue;
    const Box3D& g = gts[std::size_t(t.gt_index[a])];
    t.regression.row(Eigen::Index(a)) = encode_box(g, anchors.boxes[a]).transpose();
    t.direction[a] = static_cast<std::int8_t>(direction_bit(g.yaw));
  }
  return t;
}

TargetAssignment assign_targets(const AnchorSet& anchors, const std::vector<LabeledObject>& gts,
                                const AnchorConfig& cfg) {
  std::vector<Box3D> boxes;
  for (const auto& g : gts) {
    if (g.class_name == cfg.class_name) boxes.push_back(g.box3d);
  }
  return assign_targets(anchors, boxes, cfg);
}

// ---------------------------------------------------------------- TGT1 / PRD1

namespace {

void write_all(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open for writing " + path.string());
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

// Returns the offset of the payload after "MAGIC" and "N\n".
std::size_t parse_count_header(const std::string& bytes, const char* magic, std::size_t& count) {
  if (bytes.size() < 5 || bytes.compare(0, 4, magic) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, fmt::format("missing {} magic", magic));
  }
  const auto eol = bytes.find('\n', 4);
  if (eol == std::string::npos) throw Error(ErrorKind::UnsupportedFormat, fmt::format("missing {} header", magic));
  const std::string num = bytes.substr(4, eol - 4);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(num, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != num.size()) throw Error(ErrorKind::UnsupportedFormat, fmt::format("bad {} count", magic));
  count = static_cast<std::size_t>(v);
  return eol + 1;
}

}  // namespace

std::string serialize_tgt1(const TargetAssignment& t) {
  std::string buf = fmt::format("TGT1{}\n", t.size());
  buf.reserve(buf.size() + t.size() * 30);
  for (std::size_t a = 0; a < t.size(); ++a) {
    buf.push_back(static_cast<char>(static_cast<std::int8_t>(t.labels[a])));
    for (int k = 0; k < 7; ++k) detail::put_f32(buf, static_cast<float>(t.regression(Eigen::Index(a), k)));
    buf.push_back(static_cast<char>(t.direction[a]));
  }
  return buf;
}

void write_tgt1(const std::filesystem::path& path, const TargetAssignment& t) { write_all(path, serialize_tgt1(t)); }

TargetAssignment read_tgt1(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t n = 0;
  const std::size_t off = parse_count_header(bytes, "TGT1", n);
  if (bytes.size() - off != n * 30) throw Error(ErrorKind::MalformedRecordLength, "TGT1 payload size");
  TargetAssignment t;
  t.labels.resize(n);
  t.gt_index.assign(n, -1);
  t.regression.resize(Eigen::Index(n), 7);
  t.direction.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    const char* p = bytes.data() + off + a * 30;
    const auto code = static_cast<std::int8_t>(p[0]);
    if (code < -1 || code > 1) throw Error(ErrorKind::ParseError, fmt::format("TGT1 label code {}", int(code)));
    t.labels[a] = static_cast<AnchorLabel>(code);
    for (int k = 0; k < 7; ++k) t.regression(Eigen::Index(a), k) = detail::get_f32(p + 1 + 4 * k);
    t.direction[a] = static_cast<std::int8_t>(p[29]);
  }
  return t;
}

std::string serialize_prd1(const Predictions& p) {
  std::string buf = fmt::format("PRD1{}\n", p.size());
  buf.reserve(buf.size() + p.size() * 36);
  for (Eigen::Index i = 0; i < p.values.rows(); ++i)
    for (int k = 0; k < 9; ++k) detail::put_f32(buf, p.values(i, k));
  return buf;
}

void write_prd1(const std::filesystem::path& path, const Predictions& p) { write_all(path, serialize_prd1(p)); }

Predictions read_prd1(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t n = 0;
  const std::size_t off = parse_count_header(bytes, "PRD1", n);
  if (bytes.size() - off != n * 36) throw Error(ErrorKind::MalformedRecordLength, "PRD1 payload size");
  Predictions p;
  p.values.resize(Eigen::Index(n), 9);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 9; ++k) p.values(Eigen::Index(i), k) = detail::get_f32(bytes.data() + off + (i * 9 + k) * 4);
  return p;
}

std::vector<Detection> decode_predictions(const Predictions& preds, const AnchorSet& anchors,
                                          const AnchorConfig& anchor_cfg, const DecodeConfig& cfg) {
  if (preds.size() != anchors.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} predictions for {} anchors", preds.size(), anchors.size()));
  }
  std::vector<Detection> dets;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const auto row = preds.values.row(Eigen::Index(a));
    const double score = row[0];
    if (!std::isfinite(score)) throw Error(ErrorKind::NonFinitePrediction, fmt::format("score of anchor {}", a));
    if (score < cfg.score_floor) continue;
    const BoxResidual res = row.segment<7>(1).cast<double>().transpose();
    const int dir = row[8] > 0 ? 1 : 0;
    dets.push_back({decode_box(res, anchors.boxes[a], dir), anchor_cfg.class_name, std::clamp(score, 0.0, 1.0)});
  }
  return nms_bev(dets, cfg.nms_iou);
}

}  // namespace pillarstat
