// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include <fmt/format.h>

#include "pipeline_util.hpp"
#include "pillarstat/anchor_codec.hpp"
#include "pillarstat/commands.hpp"
#include "pillarstat/error.hpp"
#include "test_util.hpp"

using namespace pillarstat;
namespace fs = std::filesystem;

namespace {

const std::string kCli = PILLARSTAT_CLI;

PointCloud small_cloud(int seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> x(0, 60), y(-30, 30), z(-2.5f, 0.5f), v(0, 1);
  std::vector<Eigen::Vector4f> rows;
  for (int i = 0; i < 400; ++i) rows.emplace_back(x(rng), y(rng), z(rng), v(rng));
  return make_cloud(rows);
}

std::string stem(int i) { return fmt::format("{:06d}", i); }

std::size_t count_lines(const std::string& text) { return std::size_t(std::count(text.begin(), text.end(), '\n')); }

// Anchor well inside the camera view.
std::size_t visible_anchor(const AnchorSet& set) {
  return std::size_t((set.rows / 2 * set.cols + 40) * set.yaws);
}

}  // namespace

TEST_CASE("encode: one file") {
  testing::TempDir tmp;
  write_point_cloud(testing::with_parent(tmp / "in" / "000007.bin"), small_cloud(1));
  std::ostringstream out, err;
  EncodeOptions opt;
  opt.input = tmp / "in" / "000007.bin";
  opt.variant = "SS3D-6";
  opt.out_dir = tmp / "out";
  REQUIRE(cmd_encode(opt, out, err) == kExitOk);
  const auto map = read_pft1(tmp / "out" / "000007.pft1");
  CHECK(map.height == 496);
  CHECK(map.width == 432);
  CHECK(map.channels() == 6);
  CHECK(out.str().find("000007 points=400") != std::string::npos);
  CHECK(fs::exists(tmp / "out" / kResolvedConfigName));
}

TEST_CASE("encode: unknown variant is a usage error") {
  testing::TempDir tmp;
  write_point_cloud(testing::with_parent(tmp / "in" / "000000.bin"), small_cloud(1));
  std::ostringstream out, err;
  EncodeOptions opt;
  opt.input = tmp / "in";
  opt.variant = "SS3D-7";
  opt.out_dir = tmp / "out";
  CHECK(cmd_encode(opt, out, err) == kExitUsage);
  CHECK(err.str().find("SS3D-7") != std::string::npos);
}

TEST_CASE("encode: partial failure") {
  testing::TempDir tmp;
  for (int i = 0; i < 10; ++i) write_point_cloud(testing::with_parent(tmp / "in" / (stem(i) + ".bin")), small_cloud(i));
  // 4 bytes short of a whole record
  testing::write_text(tmp / "in" / "000004.bin", testing::slurp(tmp / "in" / "000004.bin").substr(4));
  std::ostringstream out, err;
  EncodeOptions opt;
  opt.input = tmp / "in";
  opt.out_dir = tmp / "out";
  opt.common.jobs = 3;
  CHECK(cmd_encode(opt, out, err) == kExitPartial);
  int outputs = 0;
  for (const auto& e : fs::directory_iterator(tmp / "out")) outputs += e.path().extension() == ".pft1";
  CHECK(outputs == 9);
  CHECK(err.str().find("000004.bin") != std::string::npos);
  CHECK(count_lines(out.str()) == 9);
}

TEST_CASE("encode: parallel output is identical to serial") {
  testing::TempDir tmp;
  for (int i = 0; i < 6; ++i) write_point_cloud(testing::with_parent(tmp / "in" / (stem(i) + ".bin")), small_cloud(100 + i));
  std::ostringstream out, err;
  EncodeOptions opt;
  opt.input = tmp / "in";
  opt.variant = "SS3D-10";
  opt.out_dir = tmp / "serial";
  REQUIRE(cmd_encode(opt, out, err) == kExitOk);
  opt.out_dir = tmp / "parallel";
  opt.common.jobs = 4;
  REQUIRE(cmd_encode(opt, out, err) == kExitOk);
  for (int i = 0; i < 6; ++i) {
    CHECK(testing::slurp(tmp / "serial" / (stem(i) + ".pft1")) == testing::slurp(tmp / "parallel" / (stem(i) + ".pft1")));
  }
}

TEST_CASE("convert-stereo") {
  testing::TempDir tmp;
  const int w = 40, h = 30;
  std::vector<std::uint16_t> disp(std::size_t(w * h)), seg(std::size_t(w * h));
  for (int i = 0; i < w * h; ++i) {
    disp[std::size_t(i)] = std::uint16_t(256 * (20 + i % 17));
    seg[std::size_t(i)] = std::uint16_t(i % 3 == 0 ? 255 : 51);
  }
  write_raster_png(testing::with_parent(tmp / "disp.png"), w, h, disp, 16);
  write_raster_png(testing::with_parent(tmp / "seg.png"), w, h, seg, 8);
  ConvertStereoOptions opt;
  opt.disparity = tmp / "disp.png";
  opt.calib = testing::fixture("kitti_calib_000000.txt");
  opt.out = tmp / "out" / "000000.bin";
  std::ostringstream out, err;

  SUBCASE("no segmentation: v is one") {
    REQUIRE(cmd_convert_stereo(opt, out, err) == kExitOk);
    const auto cloud = read_point_cloud(opt.out);
    CHECK(cloud.size() == w * h);
    CHECK((cloud.points.col(3).array() == 1.0f).all());
    // feeds encode unchanged
    EncodeOptions enc;
    enc.input = opt.out;
    enc.out_dir = tmp / "enc";
    CHECK(cmd_encode(enc, out, err) == kExitOk);
  }
  SUBCASE("segmentation passthrough") {
    opt.seg = tmp / "seg.png";
    REQUIRE(cmd_convert_stereo(opt, out, err) == kExitOk);
    const auto cloud = read_point_cloud(opt.out);
    CHECK(cloud.size() == w * h);
    CHECK(cloud.points(0, 3) == 1.0f);
    CHECK(cloud.points(1, 3) == doctest::Approx(0.2));
  }
  SUBCASE("size mismatch") {
    write_raster_png(testing::with_parent(tmp / "small.png"), w - 1, h, std::vector<std::uint16_t>(std::size_t((w - 1) * h), 0), 8);
    opt.seg = tmp / "small.png";
    CHECK(cmd_convert_stereo(opt, out, err) == kExitUsage);
    CHECK(err.str().find("DimensionMismatch") != std::string::npos);
  }
}

TEST_CASE("assign") {
  testing::TempDir tmp;
  const auto set = generate_anchors(PillarGridConfig{}, AnchorConfig{});
  const Calibration calib = Calibration::nominal();
  const std::size_t k = visible_anchor(set);
  std::mt19937_64 rng(4);
  testing::write_text(tmp / "gt" / "000000.txt", "");
  write_labels(testing::with_parent(tmp / "gt" / "000001.txt"), {testing::label_for(set.boxes[k], calib)});
  for (int i = 2; i < 10; ++i) {
    std::vector<LabeledObject> objs;
    for (const auto& b : testing::random_scene(rng, 3)) objs.push_back(testing::label_for(b, calib));
    write_labels(testing::with_parent(tmp / "gt" / (stem(i) + ".txt")), objs);
  }
  AssignOptions opt;
  opt.gt_dir = tmp / "gt";
  opt.out_dir = tmp / "tgt";
  // neighbours of an exact match sit at IoU 0.85 along x, so tighten to isolate it
  opt.common.overrides = {"anchor.pos_iou=0.9"};
  std::ostringstream out, err;
  REQUIRE(cmd_assign(opt, out, err) == kExitOk);
  int files = 0;
  for (const auto& e : fs::directory_iterator(tmp / "tgt")) files += e.path().extension() == ".tgt1";
  CHECK(files == 10);

  const auto empty = read_tgt1(tmp / "tgt" / "000000.tgt1");
  CHECK(empty.size() == set.size());
  CHECK(std::all_of(empty.labels.begin(), empty.labels.end(), [](AnchorLabel l) { return l == AnchorLabel::Negative; }));

  const auto one = read_tgt1(tmp / "tgt" / "000001.tgt1");
  CHECK(one.num_positive() == 1);
  CHECK(one.labels[k] == AnchorLabel::Positive);
  // labels carry 4 decimals, so the residual is near zero rather than exact
  CHECK(one.regression.row(Eigen::Index(k)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("decode") {
  testing::TempDir tmp;
  const auto set = generate_anchors(PillarGridConfig{}, AnchorConfig{});
  const std::size_t k = visible_anchor(set);
  Predictions p;
  p.values = decltype(p.values)::Zero(Eigen::Index(set.size()), 9);
  DecodeOptions opt;
  opt.pred_dir = tmp / "pred";
  opt.out_dir = tmp / "det";
  std::ostringstream out, err;

  SUBCASE("single anchor") {
    p.values(Eigen::Index(k), 0) = 0.9f;
    p.values(Eigen::Index(k), 8) = 2.0f;
    write_prd1(testing::with_parent(tmp / "pred" / "000000.prd1"), p);
    REQUIRE(cmd_decode(opt, out, err) == kExitOk);
    const auto dets = read_labels(tmp / "det" / "000000.txt", true);
    REQUIRE(dets.size() == 1);
    CHECK((dets[0].box3d.center - set.boxes[k].center).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(dets[0].box3d.length == doctest::Approx(set.boxes[k].length));
    CHECK(dets[0].box3d.width == doctest::Approx(set.boxes[k].width));
    CHECK(std::abs(normalize_angle(dets[0].box3d.yaw - set.boxes[k].yaw)) < 1e-4);
    CHECK(*dets[0].score == doctest::Approx(0.9));
  }
  SUBCASE("nothing above the floor") {
    p.values.col(0).setConstant(0.01f);
    write_prd1(testing::with_parent(tmp / "pred" / "000000.prd1"), p);
    REQUIRE(cmd_decode(opt, out, err) == kExitOk);
    CHECK(testing::slurp(tmp / "det" / "000000.txt").empty());
  }
  SUBCASE("two anchors decoding to the same box") {
    const std::size_t next = k + std::size_t(set.yaws);  // one stride further along x
    const double d = std::hypot(set.boxes[k].width, set.boxes[k].length);
    p.values(Eigen::Index(k), 0) = 0.7f;
    p.values(Eigen::Index(next), 0) = 0.8f;
    p.values(Eigen::Index(next), 1) = float((set.boxes[k].center.x() - set.boxes[next].center.x()) / d);
    write_prd1(testing::with_parent(tmp / "pred" / "000000.prd1"), p);
    REQUIRE(cmd_decode(opt, out, err) == kExitOk);
    const auto dets = read_labels(tmp / "det" / "000000.txt", true);
    REQUIRE(dets.size() == 1);
    CHECK(*dets[0].score == doctest::Approx(0.8));
  }
  SUBCASE("size mismatch") {
    p.values.conservativeResize(10, 9);
    write_prd1(testing::with_parent(tmp / "pred" / "000000.prd1"), p);
    CHECK(cmd_decode(opt, out, err) == kExitUsage);
  }
}

TEST_CASE("eval") {
  testing::TempDir tmp;
  for (const auto& e : fs::directory_iterator(testing::fixture("eval3/gt"))) {
    std::ifstream in(e.path());
    std::string text;
    for (std::string line; std::getline(in, line);) text += line + " 1.0\n";
    testing::write_text(tmp / "self" / e.path().filename(), text);
  }
  EvalOptions opt;
  opt.gt_dir = testing::fixture("eval3/gt");
  opt.det_dir = tmp / "self";
  opt.json_out = tmp / "report" / "eval.json";
  std::ostringstream out, err;
  REQUIRE(cmd_eval(opt, out, err) == kExitOk);
  CHECK(out.str().find("100.00  100.00  100.00") != std::string::npos);
  CHECK(testing::slurp(tmp / "report" / "eval.json").find("\"easy\": 100.0") != std::string::npos);
  CHECK(fs::exists(tmp / "report" / kResolvedConfigName));

  opt.det_dir = testing::fixture("eval3/det");
  out.str("");
  REQUIRE(cmd_eval(opt, out, err) == kExitOk);
  CHECK(out.str().find("68.18") != std::string::npos);

  opt.det_dir = tmp / "nowhere";
  CHECK(cmd_eval(opt, out, err) == kExitUsage);
}

TEST_CASE("cost") {
  std::ostringstream out, err;
  CostOptions opt;
  REQUIRE(cmd_cost(opt, out, err) == kExitOk);
  CHECK(out.str().find("691200000") != std::string::npos);
  CHECK(out.str().find("2200000") != std::string::npos);
  CHECK(out.str().find("314.2") != std::string::npos);
  opt.points = 0;
  out.str("");
  REQUIRE(cmd_cost(opt, out, err) == kExitOk);
  CHECK(out.str().find(" 0\n") != std::string::npos);
  opt.pillars = 0;
  CHECK(cmd_cost(opt, out, err) == kExitUsage);
}

TEST_CASE("config overrides and bad config") {
  testing::TempDir tmp;
  write_point_cloud(testing::with_parent(tmp / "in" / "000000.bin"), small_cloud(3));
  testing::write_text(tmp / "run.cfg", "grid.x_max = 40.96\ngrid.variant = SS3D-10\n");
  EncodeOptions opt;
  opt.input = tmp / "in";
  opt.out_dir = tmp / "out";
  opt.common.config_file = tmp / "run.cfg";
  opt.common.overrides = {"grid.variant=SS3D-Seg-6"};
  std::ostringstream out, err;
  REQUIRE(cmd_encode(opt, out, err) == kExitOk);
  const auto map = read_pft1(tmp / "out" / "000000.pft1");
  CHECK(map.width == 256);
  CHECK(map.variant == Variant::SS3D_Seg_6);
  // the echoed file alone reproduces the run
  EncodeOptions again = opt;
  again.common.config_file = tmp / "out" / kResolvedConfigName;
  again.common.overrides.clear();
  again.out_dir = tmp / "again";
  REQUIRE(cmd_encode(again, out, err) == kExitOk);
  CHECK(testing::slurp(tmp / "again" / "000000.pft1") == testing::slurp(tmp / "out" / "000000.pft1"));
  CHECK(testing::slurp(tmp / "again" / kResolvedConfigName) == testing::slurp(tmp / "out" / kResolvedConfigName));

  opt.common.overrides = {"grid.cell=0.17"};
  CHECK(cmd_encode(opt, out, err) == kExitUsage);
  opt.common.overrides = {"nonsense"};
  CHECK(cmd_encode(opt, out, err) == kExitUsage);
}

TEST_CASE("command-line tool exit codes") {
  testing::TempDir tmp;
  write_point_cloud(testing::with_parent(tmp / "in" / "000000.bin"), small_cloud(5));
  const std::string quiet = " >" + (tmp / "log.txt").string() + " 2>&1";
  CHECK(testing::run_shell(kCli + " cost" + quiet) == 0);
  CHECK(testing::slurp(tmp / "log.txt").find("691200000") != std::string::npos);
  CHECK(testing::run_shell(kCli + " encode --input " + (tmp / "in").string() + " --out " + (tmp / "o").string() +
                           " --variant SS3D-10 -j 2" + quiet) == 0);
  CHECK(read_pft1(tmp / "o" / "000000.pft1").channels() == 10);
  CHECK(testing::run_shell(kCli + " encode --input " + (tmp / "in").string() + " --out " + (tmp / "o").string() +
                           " --variant bogus" + quiet) == 2);
  CHECK(testing::run_shell(kCli + " encode --out x" + quiet) == 2);
  CHECK(testing::run_shell(kCli + " frobnicate" + quiet) == 2);
  CHECK(testing::run_shell(kCli + quiet) == 2);
  CHECK(testing::run_shell(kCli + " eval --gt " + testing::fixture("eval3/gt") + " --det " + testing::fixture("eval3/det") +
                           " --interp 40 --json " + (tmp / "r.json").string() + quiet) == 0);
  CHECK(testing::slurp(tmp / "r.json").find("\"interp_points\": 40") != std::string::npos);
  CHECK(testing::run_shell(kCli + " --help" + quiet) == 0);
}
