// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/kitti_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "pillarstat/error.hpp"

namespace pillarstat {

namespace fs = std::filesystem;

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

const char* overlap_name(Overlap o) { return o == Overlap::BEV ? "AP_BEV" : "AP_3D"; }

DifficultyRule DifficultyRule::standard(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return {d, 40, 0, 0.15};
    case Difficulty::Moderate: return {d, 25, 1, 0.30};
    case Difficulty::Hard: return {d, 25, 2, 0.50};
  }
  return {};
}

Stratified stratify(const std::vector<LabeledObject>& gts, const std::string& class_name,
                    const DifficultyRule& rule) {
  Stratified s;
  for (const auto& g : gts) {
    if (g.is_dont_care()) {
      s.dont_care.push_back(g);
    } else if (g.class_name == class_name) {
      const bool ok = g.box2d.height() >= rule.min_box2d_height && g.occlusion <= rule.max_occlusion &&
                      g.truncation <= rule.max_truncation;
      (ok ? s.valid : s.ignored).push_back(g);
    }
  }
  return s;
}

double overlap_iou(const Box3D& a, const Box3D& b, Overlap overlap) {
  return overlap == Overlap::BEV ? iou_bev(a, b) : iou_3d(a, b);
}

namespace {

// Fraction of the detection's image box covered by a DontCare region.
double covered_fraction(const Rect2D& det, const Rect2D& region) {
  const double iw = std::min(det.x_max, region.x_max) - std::max(det.x_min, region.x_min);
  const double ih = std::min(det.y_max, region.y_max) - std::max(det.y_min, region.y_min);
  if (iw <= 0 || ih <= 0 || det.area() <= 0) return 0;
  return iw * ih / det.area();
}

constexpr double kDontCareCoverage = 0.5;

}  // namespace

FrameMatch match_frame(const std::vector<LabeledObject>& dets, const Stratified& gts, Overlap overlap,
                       double iou_min) {
  FrameMatch m;
  m.outcomes.assign(dets.size(), MatchOutcome::FalsePositive);
  m.gt_matched.assign(gts.valid.size(), false);

  for (std::size_t d = 0; d < dets.size(); ++d) {
    const Box3D& box = dets[d].box3d;
    int best = -1;
    double best_iou = -1;
    for (std::size_t g = 0; g < gts.valid.size(); ++g) {
      if (m.gt_matched[g]) continue;
      const double iou = overlap_iou(box, gts.valid[g].box3d, overlap);
      if (iou >= iou_min && iou > best_iou) {
        best = int(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      m.gt_matched[std::size_t(best)] = true;
      m.outcomes[d] = MatchOutcome::TruePositive;
      continue;
    }
    const bool hits_ignored = std::any_of(gts.ignored.begin(), gts.ignored.end(), [&](const LabeledObject& g) {
      return overlap_iou(box, g.box3d, overlap) >= iou_min;
    });
    const bool in_dont_care = std::any_of(gts.dont_care.begin(), gts.dont_care.end(), [&](const LabeledObject& g) {
      return covered_fraction(dets[d].box2d, g.box2d) >= kDontCareCoverage;
    });
    if (hits_ignored || in_dont_care) m.outcomes[d] = MatchOutcome::MatchedIgnored;
  }
  return m;
}

ApResult average_precision(std::vector<ScoredOutcome> outcomes, int num_gt, int n_recall_points) {
  if (n_recall_points != 11 && n_recall_points != 40) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("interpolation points must be 11 or 40, got {}", n_recall_points));
  }
  std::sort(outcomes.begin(), outcomes.end(), [](const ScoredOutcome& a, const ScoredOutcome& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.line < b.line;
  });

  ApResult r;
  r.num_gt = num_gt;
  r.num_det = static_cast<int>(outcomes.size());
  for (const auto& o : outcomes) {
    (o.true_positive ? r.tp : r.fp) += 1;
    if (num_gt > 0) r.curve.push_back({double(r.tp) / num_gt, double(r.tp) / (r.tp + r.fp)});
  }
  if (num_gt == 0) return r;

  // Suffix maximum of precision gives the interpolated precision at each point.
  std::vector<double> best(r.curve.size() + 1, 0.0);
  for (std::size_t i = r.curve.size(); i-- > 0;) best[i] = std::max(best[i + 1], r.curve[i].precision);

  double sum = 0;
  const int first = n_recall_points == 11 ? 0 : 1;
  const double denom = n_recall_points == 11 ? 10.0 : 40.0;
  for (int k = first; k <= int(denom); ++k) {
    const double target = k / denom;
    // Recall is non-decreasing, so the first point reaching the target
    // carries the maximum precision over all points at or beyond it.
    const auto it = std::lower_bound(r.curve.begin(), r.curve.end(), target - 1e-12,
                                     [](const PrPoint& p, double t) { return p.recall < t; });
    sum += best[std::size_t(it - r.curve.begin())];
  }
  r.ap = 100.0 * sum / n_recall_points;
  return r;
}

EvalReport evaluate_frames(const std::vector<FrameData>& frames, const EvalConfig& cfg) {
  EvalReport report;
  report.config = cfg;
  for (Overlap overlap : {Overlap::BEV, Overlap::ThreeD}) {
    for (int di = 0; di < 3; ++di) {
      const DifficultyRule& rule = cfg.rules[std::size_t(di)];
      std::vector<ScoredOutcome> pooled;
      int num_gt = 0;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        const Stratified strata = stratify(frames[f].gts, cfg.class_name, rule);
        num_gt += static_cast<int>(strata.valid.size());

        std::vector<int> keep;
        for (std::size_t i = 0; i < frames[f].dets.size(); ++i) {
          const auto& d = frames[f].dets[i];
          if (d.class_name != cfg.class_name) continue;
          if (d.score.value_or(1.0) < cfg.score_floor) continue;
          if (d.box2d.height() < rule.min_box2d_height) continue;
          keep.push_back(int(i));
        }
        std::stable_sort(keep.begin(), keep.end(), [&](int a, int b) {
          return frames[f].dets[std::size_t(a)].score.value_or(1.0) > frames[f].dets[std::size_t(b)].score.value_or(1.0);
        });
        std::vector<LabeledObject> sorted;
        for (int i : keep) sorted.push_back(frames[f].dets[std::size_t(i)]);

        const FrameMatch m = match_frame(sorted, strata, overlap, cfg.iou_min);
        for (std::size_t k = 0; k < sorted.size(); ++k) {
          if (m.outcomes[k] == MatchOutcome::MatchedIgnored) continue;
          pooled.push_back({sorted[k].score.value_or(1.0), int(f), keep[k],
                            m.outcomes[k] == MatchOutcome::TruePositive});
        }
      }
      report.results[overlap == Overlap::BEV ? 0 : 1][std::size_t(di)] =
          average_precision(std::move(pooled), num_gt, cfg.interp_points);
    }
  }
  return report;
}

EvalReport evaluate(const fs::path& gt_dir, const fs::path& det_dir, const EvalConfig& cfg,
                    const std::optional<fs::path>& calib_dir) {
  auto stems = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::IoFailure, "not a directory: " + dir.string());
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") out[e.path().stem().string()] = e.path();
    }
    return out;
  };
  const auto gt_files = stems(gt_dir);
  const auto det_files = stems(det_dir);
  for (const auto& [stem, path] : det_files) {
    if (!gt_files.count(stem)) throw Error(ErrorKind::FrameMismatch, "detections for unknown frame " + stem);
  }

  std::vector<FrameData> frames;
  for (const auto& [stem, path] : gt_files) {
    std::optional<Calibration> calib;
    if (calib_dir) calib = read_calibration(*calib_dir / (stem + ".txt"));
    FrameData f;
    f.stem = stem;
    f.gts = read_labels(path, false, calib);
    if (auto it = det_files.find(stem); it != det_files.end()) f.dets = read_labels(it->second, true, calib);
    frames.push_back(std::move(f));
  }
  return evaluate_frames(frames, cfg);
}

namespace {

nlohmann::ordered_json rounded_ap(const ApResult& r) {
  if (!r.ap) return nullptr;
  return std::round(*r.ap * 100.0) / 100.0;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["class"] = report.config.class_name;
  j["iou_min"] = report.config.iou_min;
  j["interp_points"] = report.config.interp_points;
  ordered_json results, curves, counts;
  for (Overlap o : {Overlap::BEV, Overlap::ThreeD}) {
    ordered_json res, cur, cnt;
    for (Difficulty d : {Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard}) {
      const ApResult& r = report.at(o, d);
      res[difficulty_name(d)] = rounded_ap(r);
      ordered_json pts = ordered_json::array();
      for (const auto& p : r.curve) pts.push_back({p.recall, p.precision});
      cur[difficulty_name(d)] = std::move(pts);
      cnt[difficulty_name(d)] = {{"num_gt", r.num_gt}, {"num_det", r.num_det}, {"tp", r.tp}, {"fp", r.fp}};
    }
    results[overlap_name(o)] = std::move(res);
    curves[overlap_name(o)] = std::move(cur);
    counts[overlap_name(o)] = std::move(cnt);
  }
  j["results"] = std::move(results);
  j["curves"] = std::move(curves);
  j["counts"] = std::move(counts);
  return j.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::string s = fmt::format("{}  IoU {:.2f}  {}-point interpolation\n", report.config.class_name,
                              report.config.iou_min, report.config.interp_points);
  s += fmt::format("{:<8}{:>8}{:>8}{:>8}\n", "", "Easy", "Mod", "Hard");
  for (Overlap o : {Overlap::BEV, Overlap::ThreeD}) {
    s += fmt::format("{:<8}", overlap_name(o));
    for (Difficulty d : {Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard}) {
      const auto& r = report.at(o, d);
      s += r.ap ? fmt::format("{:>8.2f}", *r.ap) : fmt::format("{:>8}", "-");
    }
    s += '\n';
  }
  return s;
}

}  // namespace pillarstat
