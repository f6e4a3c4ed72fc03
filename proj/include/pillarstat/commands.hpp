// SPDX-License-Identifier: Apache-2.0
//
// Batch commands behind the command-line tool. Each returns the process
// exit code: 0 success, 1 partial failure, 2 usage or configuration error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pillarstat/config.hpp"

namespace pillarstat {

enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitUsage = 2 };

struct CommonOptions {
  std::optional<std::filesystem::path> config_file;
  /// `key=value` overrides applied after the config file.
  std::vector<std::string> overrides;
  int jobs = 1;
};

struct EncodeOptions {
  CommonOptions common;
  std::filesystem::path input;
  std::optional<std::string> variant;
  std::filesystem::path out_dir;
};

struct ConvertStereoOptions {
  CommonOptions common;
  std::filesystem::path disparity;
  std::filesystem::path calib;
  std::optional<std::filesystem::path> seg;
  std::filesystem::path out;
};

struct AssignOptions {
  CommonOptions common;
  std::filesystem::path gt_dir;
  std::filesystem::path out_dir;
};

struct DecodeOptions {
  CommonOptions common;
  std::filesystem::path pred_dir;
  std::filesystem::path out_dir;
};

struct EvalOptions {
  CommonOptions common;
  std::filesystem::path gt_dir;
  std::filesystem::path det_dir;
  std::optional<std::string> class_name;
  std::optional<double> overlap;
  std::optional<int> interp_points;
  std::optional<std::filesystem::path> json_out;
};

struct CostOptions {
  std::uint64_t pillars = 12000;
  std::uint64_t points_per_pillar = 100;
  std::uint64_t in_features = 9;
  std::uint64_t out_features = 64;
  std::uint64_t points = 100000;
  CommonOptions common;
};

int cmd_encode(const EncodeOptions& opt, std::ostream& out, std::ostream& err);
int cmd_convert_stereo(const ConvertStereoOptions& opt, std::ostream& out, std::ostream& err);
int cmd_assign(const AssignOptions& opt, std::ostream& out, std::ostream& err);
int cmd_decode(const DecodeOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_cost(const CostOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace pillarstat
