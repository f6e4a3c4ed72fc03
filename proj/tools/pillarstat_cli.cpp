// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <iostream>

#include "pillarstat/commands.hpp"

using namespace pillarstat;

namespace {

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", c.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--jobs,-j", c.jobs, "files processed in parallel")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical pillar encoding, box coding and KITTI-style evaluation for 3D detection"};
  app.require_subcommand(1);

  EncodeOptions enc;
  auto* encode = app.add_subcommand("encode", "encode velodyne .bin clouds into PFT1 feature maps");
  encode->add_option("--input", enc.input, "a .bin file or a directory of them")->required();
  encode->add_option("--variant", enc.variant, "SS3D-6 | SS3D-10 | SS3D-Seg-6 | SS3D-Seg-10");
  encode->add_option("--out", enc.out_dir, "output directory")->required();
  add_common(encode, enc.common);

  ConvertStereoOptions cs;
  auto* convert = app.add_subcommand("convert-stereo", "disparity (+segmentation) PNG to a velodyne .bin cloud");
  convert->add_option("--disparity", cs.disparity)->required();
  convert->add_option("--calib", cs.calib)->required();
  convert->add_option("--seg", cs.seg);
  convert->add_option("--out", cs.out, "output .bin path")->required();
  add_common(convert, cs.common);

  AssignOptions as;
  auto* assign = app.add_subcommand("assign", "anchor targets (TGT1) from ground-truth label files");
  assign->add_option("--gt", as.gt_dir)->required();
  assign->add_option("--out", as.out_dir)->required();
  add_common(assign, as.common);

  DecodeOptions dec;
  auto* decode = app.add_subcommand("decode", "PRD1 network outputs to KITTI detection files");
  decode->add_option("--pred", dec.pred_dir)->required();
  decode->add_option("--out", dec.out_dir)->required();
  add_common(decode, dec.common);

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "KITTI 3D/BEV average precision");
  eval->add_option("--gt", ev.gt_dir)->required();
  eval->add_option("--det", ev.det_dir)->required();
  eval->add_option("--class", ev.class_name);
  eval->add_option("--overlap", ev.overlap, "IoU threshold");
  eval->add_option("--interp", ev.interp_points, "11 or 40 recall points");
  eval->add_option("--json", ev.json_out, "report path (default eval_report.json)");
  add_common(eval, ev.common);

  CostOptions co;
  auto* cost = app.add_subcommand("cost", "fc pillar encoder MACs vs statistical encoder operations");
  cost->add_option("--pillars", co.pillars);
  cost->add_option("--points-per-pillar", co.points_per_pillar);
  cost->add_option("--in-features", co.in_features);
  cost->add_option("--out-features", co.out_features);
  cost->add_option("--points", co.points, "cloud size for the statistical encoder");
  add_common(cost, co.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*encode) return cmd_encode(enc, std::cout, std::cerr);
  if (*convert) return cmd_convert_stereo(cs, std::cout, std::cerr);
  if (*assign) return cmd_assign(as, std::cout, std::cerr);
  if (*decode) return cmd_decode(dec, std::cout, std::cerr);
  if (*eval) return cmd_eval(ev, std::cout, std::cerr);
  if (*cost) return cmd_cost(co, std::cout, std::cerr);
  return kExitUsage;
}
