// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pillarstat/error.hpp"

namespace pillarstat {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  // strtod accepts "inf"/"-inf", which the projection window relies on.
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || std::isnan(d)) {
    throw Error(ErrorKind::ConfigError, fmt::format("{}: '{}' is not a number", key, v));
  }
  return d;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorKind::ConfigError, fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

std::string real(double d) {
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  return fmt::format("{}", d);  // shortest round-trip representation
}

const char* kRuleNames[3] = {"easy", "moderate", "hard"};

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto R = [&](double& field) { field = parse_real(key, v); };
  auto I = [&](int& field) { field = parse_int(key, v); };


  if (key == "grid.x_min") return R(grid.x_min);
  if (key == "grid.x_max") return R(grid.x_max);
  if (key == "grid.y_min") return R(grid.y_min);
  if (key == "grid.y_max") return R(grid.y_max);
  if (key == "grid.z_min") return R(grid.z_min);
  if (key == "grid.z_max") return R(grid.z_max);
  if (key == "grid.cell") return R(grid.cell);
  if (key == "grid.variant") {
    const auto parsed = parse_variant(v);
    if (!parsed) throw Error(ErrorKind::ConfigError, fmt::format("unknown variant '{}'", v));
    grid.variant = *parsed;
    return;
  }
  if (key == "anchor.class") {
    anchors.class_name = v;
    return;
  }
  if (key == "anchor.width") return R(anchors.width);
  if (key == "anchor.length") return R(anchors.length);
  if (key == "anchor.height") return R(anchors.height);
  if (key == "anchor.z_center") return R(anchors.z_center);
  if (key == "anchor.stride") return I(anchors.stride);
  if (key == "anchor.pos_iou") return R(anchors.pos_iou);
  if (key == "anchor.neg_iou") return R(anchors.neg_iou);
  if (key == "anchor.yaws") {
    anchors.yaws.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) anchors.yaws.push_back(parse_real(key, trim(item)));
    return;
  }
  if (key == "decode.score_floor") return R(decode.score_floor);
  if (key == "decode.nms_iou") return R(decode.nms_iou);
  if (key == "eval.class") {
    eval.class_name = v;
    return;
  }
  if (key == "eval.iou_min") return R(eval.iou_min);
  if (key == "eval.interp_points") return I(eval.interp_points);
  if (key == "eval.score_floor") return R(eval.score_floor);
  for (int d = 0; d < 3; ++d) {
    const std::string prefix = fmt::format("eval.{}.", kRuleNames[d]);
    auto& rule = eval.rules[std::size_t(d)];
    if (key == prefix + "min_height") return R(rule.min_box2d_height);
    if (key == prefix + "max_occlusion") return I(rule.max_occlusion);
    if (key == prefix + "max_truncation") return R(rule.max_truncation);
  }
  if (key == "stereo.max_depth") return R(projection.max_depth);
  if (key == "stereo.min_disparity") return R(projection.min_disparity);
  if (key == "stereo.z_min") return R(projection.z_min);
  if (key == "stereo.z_max") return R(projection.z_max);
  if (key == "stereo.baseline") return R(fallback_baseline);
  if (key == "stereo.disparity_scale") return R(disparity_scale);
  if (key == "stereo.segmentation_scale") return R(segmentation_scale);
  if (key == "io.calib_dir") {
    calib_dir = v;
    return;
  }
  throw Error(ErrorKind::ConfigError, fmt::format("unknown config key '{}'", key));
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> e;
  e["grid.x_min"] = real(grid.x_min);
  e["grid.x_max"] = real(grid.x_max);
  e["grid.y_min"] = real(grid.y_min);
  e["grid.y_max"] = real(grid.y_max);
  e["grid.z_min"] = real(grid.z_min);
  e["grid.z_max"] = real(grid.z_max);
  e["grid.cell"] = real(grid.cell);
  e["grid.variant"] = std::string(variant_name(grid.variant));
  e["anchor.class"] = anchors.class_name;
  e["anchor.width"] = real(anchors.width);
  e["anchor.length"] = real(anchors.length);
  e["anchor.height"] = real(anchors.height);
  e["anchor.z_center"] = real(anchors.z_center);
  e["anchor.stride"] = std::to_string(anchors.stride);
  e["anchor.pos_iou"] = real(anchors.pos_iou);
  e["anchor.neg_iou"] = real(anchors.neg_iou);
  std::string yaws;
  for (std::size_t i = 0; i < anchors.yaws.size(); ++i) yaws += (i ? "," : "") + real(anchors.yaws[i]);
  e["anchor.yaws"] = yaws;
  e["decode.score_floor"] = real(decode.score_floor);
  e["decode.nms_iou"] = real(decode.nms_iou);
  e["eval.class"] = eval.class_name;
  e["eval.iou_min"] = real(eval.iou_min);
  e["eval.interp_points"] = std::to_string(eval.interp_points);
  e["eval.score_floor"] = real(eval.score_floor);
  for (int d = 0; d < 3; ++d) {
    const auto& rule = eval.rules[std::size_t(d)];
    e[fmt::format("eval.{}.min_height", kRuleNames[d])] = real(rule.min_box2d_height);
    e[fmt::format("eval.{}.max_occlusion", kRuleNames[d])] = std::to_string(rule.max_occlusion);
    e[fmt::format("eval.{}.max_truncation", kRuleNames[d])] = real(rule.max_truncation);
  }
  e["stereo.max_depth"] = real(projection.max_depth);
  e["stereo.min_disparity"] = real(projection.min_disparity);
  e["stereo.z_min"] = real(projection.z_min);
  e["stereo.z_max"] = real(projection.z_max);
  e["stereo.baseline"] = real(fallback_baseline);
  e["stereo.disparity_scale"] = real(disparity_scale);
  e["stereo.segmentation_scale"] = real(segmentation_scale);
  e["io.calib_dir"] = calib_dir;
  return e;
}

void RunConfig::validate() const {
  grid.validate();
  anchors.validate();
  if (!projection.valid()) throw Error(ErrorKind::ConfigError, "invalid stereo.* projection settings");
  if (eval.interp_points != 11 && eval.interp_points != 40) {
    throw Error(ErrorKind::ConfigError, "eval.interp_points must be 11 or 40");
  }
  if (!(eval.iou_min >= 0 && eval.iou_min <= 1)) throw Error(ErrorKind::ConfigError, "eval.iou_min outside [0, 1]");
  if (!(decode.nms_iou >= 0 && decode.nms_iou <= 1)) throw Error(ErrorKind::ConfigError, "decode.nms_iou outside [0, 1]");
  if (!(fallback_baseline > 0)) throw Error(ErrorKind::ConfigError, "stereo.baseline must be positive");
  if (!(disparity_scale > 0 && segmentation_scale > 0)) throw Error(ErrorKind::ConfigError, "raster scales must be positive");
}

std::string RunConfig::serialize() const {
  std::string s;
  for (const auto& [k, v] : entries()) s += k + " = " + v + "\n";
  return s;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigError, fmt::format("line {}: expected key = value", line_no), line_no);
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, fmt::format("line {}: {}", line_no, e.what()), line_no);
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  std::ofstream out(out_dir / kResolvedConfigName, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write resolved config into " + out_dir.string());
  out << cfg.serialize();
}

}  // namespace pillarstat
