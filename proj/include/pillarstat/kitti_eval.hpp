// SPDX-License-Identifier: Apache-2.0
//
// KITTI-style 3D detection scoring: difficulty strata, greedy matching and
// interpolated average precision over BEV and 3D overlap.
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pillarstat/ingest.hpp"

namespace pillarstat {

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2 };
enum class Overlap { BEV, ThreeD };

const char* difficulty_name(Difficulty d);
const char* overlap_name(Overlap o);

struct DifficultyRule {
  Difficulty name = Difficulty::Easy;
  double min_box2d_height = 40;
  int max_occlusion = 0;
  double max_truncation = 0.15;

  static DifficultyRule standard(Difficulty d);
};

struct Stratified {
  std::vector<LabeledObject> valid;
  /// Evaluated-class objects failing the rule.
  std::vector<LabeledObject> ignored;
  std::vector<LabeledObject> dont_care;
};

Stratified stratify(const std::vector<LabeledObject>& gts, const std::string& class_name,
                    const DifficultyRule& rule);

enum class MatchOutcome { TruePositive, FalsePositive, MatchedIgnored };

struct FrameMatch {
  /// Parallel to the detections passed in (sorted by descending score).
  std::vector<MatchOutcome> outcomes;
  std::vector<bool> gt_matched;
};

/// Detections must already be sorted by descending score.
FrameMatch match_frame(const std::vector<LabeledObject>& dets, const Stratified& gts,
                       Overlap overlap, double iou_min);

double overlap_iou(const Box3D& a, const Box3D& b, Overlap overlap);

struct ScoredOutcome {
  double score = 0;
  int frame = 0;
  int line = 0;
  bool true_positive = false;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct ApResult {
  std::optional<double> ap;  // percent; absent when there is no ground truth
  std::vector<PrPoint> curve;
  int num_gt = 0;
  int num_det = 0;
  int tp = 0;
  int fp = 0;
};

/// Pools TP/FP outcomes (matched-ignored already removed), sorts by score
/// (ties by frame then line) and averages the interpolated precision over
/// 11 recall points {0, .1, …, 1} or 40 points {1/40, …, 1}.
ApResult average_precision(std::vector<ScoredOutcome> outcomes, int num_gt, int n_recall_points);

struct EvalConfig {
  std::string class_name = "Car";
  double iou_min = 0.7;
  int interp_points = 11;
  double score_floor = 0.0;
  std::array<DifficultyRule, 3> rules{DifficultyRule::standard(Difficulty::Easy),
                                      DifficultyRule::standard(Difficulty::Moderate),
                                      DifficultyRule::standard(Difficulty::Hard)};
};

struct FrameData {
  std::string stem;
  std::vector<LabeledObject> gts;
  std::vector<LabeledObject> dets;
};

struct EvalReport {
  EvalConfig config;
  /// [overlap][difficulty]
  std::array<std::array<ApResult, 3>, 2> results;

  const ApResult& at(Overlap o, Difficulty d) const {
    return results[o == Overlap::BEV ? 0 : 1][static_cast<int>(d)];
  }
};

EvalReport evaluate_frames(const std::vector<FrameData>& frames, const EvalConfig& cfg);

/// Pairs label files by stem. A gt frame with no detection file counts as
/// all-missed; a detection file with no gt counterpart is FrameMismatch.
EvalReport evaluate(const std::filesystem::path& gt_dir, const std::filesystem::path& det_dir,
                    const EvalConfig& cfg,
                    const std::optional<std::filesystem::path>& calib_dir = std::nullopt);

std::string report_to_json(const EvalReport& report);
/// Text table: one row per overlap kind, one column per difficulty.
std::string report_to_table(const EvalReport& report);

}  // namespace pillarstat
