// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/commands.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "pillarstat/error.hpp"

namespace pillarstat {

namespace fs = std::filesystem;

namespace {

RunConfig resolve(const CommonOptions& opt) {
  RunConfig cfg;
  if (opt.config_file) cfg = load_config(*opt.config_file);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "override '" + kv + "' is not key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

/// Regular files with the extension, sorted by stem.
std::vector<fs::path> list_inputs(const fs::path& input, const std::string& ext) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw Error(ErrorKind::IoFailure, "no such file or directory: " + input.string());
  std::map<std::string, fs::path> by_stem;
  for (const auto& e : fs::directory_iterator(input)) {
    if (e.is_regular_file() && e.path().extension() == ext) by_stem[e.path().stem().string()] = e.path();
  }
  std::vector<fs::path> out;
  for (auto& [stem, p] : by_stem) out.push_back(p);
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string());
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::size_t(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct FileResult {
  std::string line;
  std::string error;
};

/// Prints per-file lines in input order and maps failures to exit codes.
int report(const std::vector<fs::path>& inputs, const std::vector<FileResult>& results, std::ostream& out,
           std::ostream& err) {
  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].error.empty()) {
      ++failed;
      err << "error: " << inputs[i].string() << ": " << results[i].error << "\n";
    } else {
      out << results[i].line << "\n";
    }
  }
  return failed == 0 ? kExitOk : kExitPartial;
}

std::optional<Calibration> frame_calibration(const RunConfig& cfg, const std::string& stem) {
  if (cfg.calib_dir.empty()) return std::nullopt;
  return read_calibration(fs::path(cfg.calib_dir) / (stem + ".txt"), cfg.fallback_baseline);
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace

int cmd_encode(const EncodeOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<fs::path> inputs;
  const int setup = guarded(err, [&] {
    cfg = resolve(opt.common);
    if (opt.variant) {
      const auto v = parse_variant(*opt.variant);
      if (!v) throw Error(ErrorKind::ConfigError, "unknown variant '" + *opt.variant + "'");
      cfg.grid.variant = *v;
    }
    cfg.validate();
    inputs = list_inputs(opt.input, ".bin");
    ensure_dir(opt.out_dir);
    echo_config(cfg, opt.out_dir);
    return kExitOk;
  });
  if (setup != kExitOk) return setup;

  std::vector<FileResult> results(inputs.size());
  parallel_for(inputs.size(), opt.common.jobs, [&](std::size_t i) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const PointCloud cloud = read_point_cloud(inputs[i]);
      EncodeSummary s;
      const FeatureMap map = encode(cloud, cfg.grid, &s);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      write_pft1(opt.out_dir / (inputs[i].stem().string() + ".pft1"), map);
      results[i].line = fmt::format("{} points={} in_range={} occupied={} dropped={} ms={:.2f}", inputs[i].stem().string(),
                                    s.points, s.in_range, s.occupied, cloud.dropped_non_finite, ms);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });
  return report(inputs, results, out, err);
}

int cmd_convert_stereo(const ConvertStereoOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve(opt.common);
    cfg.validate();
    const Calibration calib = read_calibration(opt.calib, cfg.fallback_baseline);
    const Raster disp = read_raster(opt.disparity, cfg.disparity_scale);
    std::optional<Raster> seg;
    if (opt.seg) seg = read_raster(*opt.seg, cfg.segmentation_scale);
    const PointCloud cloud = disparity_to_cloud(disp, calib, cfg.projection, seg);
    const fs::path dir = opt.out.has_parent_path() ? opt.out.parent_path() : fs::path(".");
    ensure_dir(dir);
    write_point_cloud(opt.out, cloud);
    echo_config(cfg, dir);
    out << fmt::format("{} points={} from {}x{} disparity{}\n", opt.out.string(), cloud.size(), disp.width,
                       disp.height, seg ? " with segmentation" : "");
    return kExitOk;
  });
}

int cmd_assign(const AssignOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<fs::path> inputs;
  AnchorSet anchors;
  const int setup = guarded(err, [&] {
    cfg = resolve(opt.common);
    cfg.validate();
    inputs = list_inputs(opt.gt_dir, ".txt");
    anchors = generate_anchors(cfg.grid, cfg.anchors);
    ensure_dir(opt.out_dir);
    echo_config(cfg, opt.out_dir);
    return kExitOk;
  });
  if (setup != kExitOk) return setup;

  std::vector<FileResult> results(inputs.size());
  parallel_for(inputs.size(), opt.common.jobs, [&](std::size_t i) {
    try {
      const std::string stem = inputs[i].stem().string();
      const auto gts = read_labels(inputs[i], false, frame_calibration(cfg, stem));
      const TargetAssignment t = assign_targets(anchors, gts, cfg.anchors);
      write_tgt1(opt.out_dir / (stem + ".tgt1"), t);
      results[i].line = fmt::format("{} anchors={} positive={}", stem, t.size(), t.num_positive());
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });
  return report(inputs, results, out, err);
}

int cmd_decode(const DecodeOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<fs::path> inputs;
  AnchorSet anchors;
  const int setup = guarded(err, [&] {
    cfg = resolve(opt.common);
    cfg.validate();
    inputs = list_inputs(opt.pred_dir, ".prd1");
    anchors = generate_anchors(cfg.grid, cfg.anchors);
    ensure_dir(opt.out_dir);
    echo_config(cfg, opt.out_dir);
    return kExitOk;
  });
  if (setup != kExitOk) return setup;

  std::vector<FileResult> results(inputs.size());
  std::atomic<bool> size_mismatch{false};
  parallel_for(inputs.size(), opt.common.jobs, [&](std::size_t i) {
    try {
      const std::string stem = inputs[i].stem().string();
      const Calibration calib = frame_calibration(cfg, stem).value_or(Calibration::nominal());
      const auto dets = decode_predictions(read_prd1(inputs[i]), anchors, cfg.anchors, cfg.decode);
      std::vector<LabeledObject> labels;
      for (const auto& d : dets) {
        const auto box2d = project_box_to_image(d.box, calib);
        if (!box2d) continue;  // outside the camera view
        LabeledObject o;
        o.class_name = d.class_name;
        o.box2d = *box2d;
        o.score = d.score;
        box_to_camera_label(d.box, calib, o);
        labels.push_back(std::move(o));
      }
      write_labels(opt.out_dir / (stem + ".txt"), labels);
      results[i].line = fmt::format("{} detections={}", stem, labels.size());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DimensionMismatch) size_mismatch = true;
      results[i].error = e.what();
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });
  const int code = report(inputs, results, out, err);
  return size_mismatch ? kExitUsage : code;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve(opt.common);
    if (opt.class_name) cfg.eval.class_name = *opt.class_name;
    if (opt.overlap) cfg.eval.iou_min = *opt.overlap;
    if (opt.interp_points) cfg.eval.interp_points = *opt.interp_points;
    cfg.validate();
    if (!fs::is_directory(opt.gt_dir)) throw Error(ErrorKind::IoFailure, "missing gt directory " + opt.gt_dir.string());
    if (!fs::is_directory(opt.det_dir)) throw Error(ErrorKind::IoFailure, "missing detection directory " + opt.det_dir.string());

    std::optional<fs::path> calib_dir;
    if (!cfg.calib_dir.empty()) calib_dir = fs::path(cfg.calib_dir);
    const EvalReport report = evaluate(opt.gt_dir, opt.det_dir, cfg.eval, calib_dir);

    const fs::path json_path = opt.json_out.value_or(fs::path("eval_report.json"));
    const fs::path dir = json_path.has_parent_path() ? json_path.parent_path() : fs::path(".");
    ensure_dir(dir);
    std::ofstream js(json_path, std::ios::trunc);
    if (!js) throw Error(ErrorKind::IoFailure, "cannot write " + json_path.string());
    js << report_to_json(report);
    echo_config(cfg, dir);
    out << report_to_table(report);
    return kExitOk;
  });
}

int cmd_cost(const CostOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve(opt.common);
    cfg.validate();
    if (opt.pillars == 0 || opt.points_per_pillar == 0 || opt.in_features == 0 || opt.out_features == 0) {
      throw Error(ErrorKind::InvalidArgument, "fc encoder dimensions must be positive");
    }
    const std::uint64_t macs = fc_encoder_macs(opt.pillars, opt.points_per_pillar, opt.in_features, opt.out_features);
    const std::uint64_t ops = statistical_encoder_flops(cfg.grid, opt.points);
    out << fmt::format("{:<44}{:>16}\n", "encoder", "operations");
    out << fmt::format("{:<44}{:>16}\n",
                       fmt::format("fc ({} pillars x {} pts x {} in x {} out)", opt.pillars, opt.points_per_pillar,
                                   opt.in_features, opt.out_features),
                       macs);
    out << fmt::format("{:<44}{:>16}\n", fmt::format("statistical ({} points, {}x{} grid)", opt.points, cfg.grid.height(), cfg.grid.width()), ops);
    if (ops > 0) {
      out << fmt::format("{:<44}{:>16.1f}\n", "ratio fc / statistical", double(macs) / double(ops));
    } else {
      out << fmt::format("{:<44}{:>16}\n", "ratio fc / statistical", "inf");
    }
    return kExitOk;
  });
}

}  // namespace pillarstat
