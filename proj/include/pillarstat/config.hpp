// SPDX-License-Identifier: Apache-2.0
//
// Flat `section.key = value` configuration shared by every command.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "pillarstat/anchor_codec.hpp"
#include "pillarstat/kitti_eval.hpp"
#include "pillarstat/pillar_encoder.hpp"
#include "pillarstat/pseudo_lidar.hpp"

namespace pillarstat {

struct RunConfig {
  PillarGridConfig grid;
  AnchorConfig anchors;
  DecodeConfig decode;
  EvalConfig eval;
  ProjectionConfig projection;
  double fallback_baseline = 0.54;
  double segmentation_scale = 255.0;
  double disparity_scale = 256.0;
  /// Directory of per-frame calib files, paired by stem. Empty = nominal.
  std::string calib_dir;

  /// Applies one `key = value` assignment; throws ConfigError on unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its resolved value, in a fixed order.
  std::map<std::string, std::string> entries() const;
  void validate() const;

  std::string serialize() const;
};

/// Parses a config file on top of the defaults. Blank lines and lines
/// starting with '#' are skipped.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// File name written into every output directory.
inline constexpr const char* kResolvedConfigName = "resolved.cfg";
void echo_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace pillarstat
