// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <cmath>
#include <random>

#include "cloud_gen.hpp"
#include "pillarstat/error.hpp"
#include "pillarstat/pillar_encoder.hpp"
#include "test_util.hpp"

using namespace pillarstat;

namespace {

PillarGridConfig grid(Variant v = Variant::SS3D_6) {
  PillarGridConfig g;
  g.variant = v;
  return g;
}

constexpr Variant kAll[] = {Variant::SS3D_6, Variant::SS3D_10, Variant::SS3D_Seg_6, Variant::SS3D_Seg_10};

}  // namespace

TEST_CASE("default grid geometry") {
  const auto g = grid();
  CHECK(g.height() == 496);
  CHECK(g.width() == 432);
  CHECK(g.pillar_height() == doctest::Approx(4.0));
  for (Variant v : kAll) {
    auto gv = grid(v);
    const auto map = encode(PointCloud{}, gv);
    CHECK(map.height == 496);
    CHECK(map.width == 432);
    CHECK(map.channels() == variant_channels(v));
    CHECK(map.data.isZero(0.0f));
  }
  CHECK(variant_channels(Variant::SS3D_Seg_6) == 6);
  CHECK(variant_channels(Variant::SS3D_Seg_10) == 10);
}

TEST_CASE("variant names") {
  for (Variant v : kAll) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(parse_variant("ss3d-seg-10") == Variant::SS3D_Seg_10);
  CHECK(!parse_variant("SS3D-7"));
}

TEST_CASE("grid validation") {
  auto g = grid();
  g.x_max = 69.0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = grid();
  g.z_max = g.z_min;
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("pillar_index") {
  const auto g = grid();
  CHECK(pillar_index(0.0, -39.68, g) == PillarIndex{0, 0});
  CHECK(pillar_index(10.0, 0.0, g) == PillarIndex{248, 62});
  CHECK(!pillar_index(69.12, 0.0, g));
  CHECK(!pillar_index(-0.001, 0.0, g));
  CHECK(!pillar_index(1.0, 39.68, g));
  CHECK(pillar_index(69.1199, 39.6799, g) == PillarIndex{495, 431});
  CHECK(!pillar_index(NAN, 0.0, g));
  // every interior edge belongs to the cell above it
  for (int k = 1; k < g.width(); ++k) CHECK(pillar_index(g.x_edge(k), 0.0, g)->col == k);
  for (int k = 1; k < g.height(); ++k) CHECK(pillar_index(1.0, g.y_edge(k), g)->row == k);
}

TEST_CASE("single point, SS3D-6") {
  const PointCloud c = make_cloud({{0.08f, -39.60f, -1.0f, 0.5f}});
  const auto map = encode(c, grid());
  CHECK(map.at(0, 0, 0) == 1.0f);
  CHECK(map.at(0, 0, 1) == 1.0f);
  CHECK(map.at(0, 0, 2) == -1.0f);
  CHECK(map.at(0, 0, 3) == 0.5f);
  CHECK(map.at(0, 0, 4) == -1.0f);
  CHECK(map.at(0, 0, 5) == 0.5f);
  CHECK(map.data.cwiseAbs().sum() == doctest::Approx(1 + 1 + 1 + 0.5 + 1 + 0.5));
}

TEST_CASE("two points in one pillar") {
  const PointCloud c = make_cloud({{0.05f, -39.65f, -2.0f, 0.2f}, {0.10f, -39.55f, 0.5f, 0.8f}});
  SUBCASE("SS3D-6") {
    const auto map = encode(c, grid());
    const Eigen::RowVectorXf expected = (Eigen::RowVectorXf(6) << 1, 2, -0.75f, 0.5f, 0.5f, 0.8f).finished();
    CHECK((map.pillar(0, 0) - expected).cwiseAbs().maxCoeff() <= 1e-6f);
  }
  SUBCASE("SS3D-10") {
    const auto map = encode(c, grid(Variant::SS3D_10));
    const double xc = 0.08, yc = -39.60;
    const Eigen::RowVectorXf expected =
        (Eigen::RowVectorXf(10) << 2, -0.75f, 0.5f, 0.5f, 0.8f, float(std::sqrt(xc * xc + yc * yc)),
         float(std::atan2(yc, xc)), -2.0f, 0.0f, 0.5f)
            .finished();
    CHECK((map.pillar(0, 0) - expected).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("height slices are disjoint intervals") {
  // slices [-3,-5/3), [-5/3,-1/3), [-1/3,1]
  const PointCloud c = make_cloud({{5.0f, 0.05f, -1.7f, 0.1f},
                                   {5.0f, 0.05f, -1.6f, 0.2f},
                                   {5.0f, 0.05f, -0.4f, 0.3f},
                                   {5.0f, 0.05f, 1.0f, 0.4f}});
  const auto map = encode(c, grid(Variant::SS3D_10));
  const auto idx = *pillar_index(5.0, 0.05, grid());
  CHECK(map.at(idx.row, idx.col, 7) == -1.7f);
  CHECK(map.at(idx.row, idx.col, 8) == -0.4f);
  CHECK(map.at(idx.row, idx.col, 9) == 1.0f);
}

TEST_CASE("vertical range is closed at both ends") {
  const PointCloud c = make_cloud({{1.0f, 1.0f, -3.0f, 0.5f}, {2.0f, 1.0f, 1.0f, 0.5f}, {3.0f, 1.0f, 1.0001f, 0.5f}});
  EncodeSummary s;
  encode(c, grid(), &s);
  CHECK(s.in_range == 2);
  CHECK(s.occupied == 2);
}

TEST_CASE("ties on max height take the later point") {
  const PointCloud c = make_cloud({{1.0f, 1.0f, 0.25f, 0.1f}, {1.01f, 1.01f, 0.25f, 0.9f}});
  const auto map = encode(c, grid());
  const auto idx = *pillar_index(1.0, 1.0, grid());
  CHECK(map.at(idx.row, idx.col, 5) == 0.9f);
  CHECK(encode_oracle(c, grid()).at(idx.row, idx.col, 5) == 0.9f);
}

TEST_CASE("far points never contribute") {
  std::mt19937_64 rng(9);
  const auto base = testing::random_cloud(rng, 500, grid(), 0.0);
  PointCloud with_far = base;
  with_far.points.conservativeResize(base.size() + 1, 4);
  with_far.points.row(base.size()) << 200.0f, 0.0f, 0.0f, 1.0f;
  CHECK(encode(base, grid(Variant::SS3D_10)).data == encode(with_far, grid(Variant::SS3D_10)).data);
}

TEST_CASE("encode agrees with the oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const auto cloud = trial % 2 ? testing::clustered_cloud(rng, 3000, grid())
                                 : testing::random_cloud(rng, 4000, grid());
    for (Variant v : kAll) {
      CHECK(testing::feature_distance(encode(cloud, grid(v)), encode_oracle(cloud, grid(v))) <= 1e-6);
    }
  }
  CHECK(encode_oracle(PointCloud{}, grid()).data.isZero(0.0f));
}

TEST_CASE("boundary sweep matches the oracle") {
  const auto g = grid(Variant::SS3D_10);
  std::vector<Eigen::Vector4f> pts;
  for (int k = 0; k <= g.width(); ++k) pts.emplace_back(float(g.x_edge(k)), float(g.y_edge(k % (g.height() + 1))), -3.0f, 0.3f);
  for (int k = 0; k <= g.height(); ++k) pts.emplace_back(float(g.x_edge(k % (g.width() + 1))), float(g.y_edge(k)), 1.0f, 0.7f);
  for (int k = 0; k <= g.height(); ++k) pts.emplace_back(float(g.x_max), float(g.y_edge(k)), 0.0f, 0.2f);
  pts.emplace_back(float(g.x_min), float(g.y_min), -1.0f, 0.5f);
  pts.emplace_back(float(g.x_max), float(g.y_max), -1.0f, 0.5f);
  const auto cloud = make_cloud(pts);
  CHECK(testing::feature_distance(encode(cloud, g), encode_oracle(cloud, g)) <= 1e-6);
}

TEST_CASE("permutation invariance without height ties") {
  std::mt19937_64 rng(77);
  const auto cloud = testing::clustered_cloud(rng, 2000, grid());
  PointCloud shuffled = cloud;
  std::vector<Eigen::Index> perm(std::size_t(cloud.size()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.points.row(Eigen::Index(i)) = cloud.points.row(perm[i]);
  for (Variant v : kAll) {
    // sums may reassociate; everything else must match exactly
    CHECK(testing::feature_distance(encode(shuffled, grid(v)), encode(cloud, grid(v))) <= 1e-6);
  }
}

TEST_CASE("empty pillars are zero and occupied pillars match counts") {
  std::mt19937_64 rng(5);
  const auto cloud = testing::random_cloud(rng, 3000, grid());
  for (Variant v : {Variant::SS3D_6, Variant::SS3D_10}) {
    const auto map = encode(cloud, grid(v));
    const int count_ch = variant_channels(v) == 6 ? 1 : 0;
    for (Eigen::Index p = 0; p < map.data.rows(); ++p) {
      if (map.data(p, count_ch) == 0.0f) {
        CHECK(map.data.row(p).isZero(0.0f));
      } else if (variant_channels(v) == 6) {
        CHECK(map.data(p, 0) == 1.0f);
      }
    }
  }
}

TEST_CASE("segmentation values only change the v channels") {
  std::mt19937_64 rng(31);
  const auto lidar = testing::clustered_cloud(rng, 3000, grid());
  PointCloud seg = lidar;
  std::uniform_int_distribution<int> label(0, 33);
  for (Eigen::Index i = 0; i < seg.size(); ++i) seg.points(i, 3) = float(label(rng)) / 255.0f;

  const auto a6 = encode(lidar, grid(Variant::SS3D_6)), b6 = encode(seg, grid(Variant::SS3D_Seg_6));
  for (int ch : {0, 1, 2, 4}) CHECK(a6.data.col(ch) == b6.data.col(ch));
  const auto a10 = encode(lidar, grid(Variant::SS3D_10)), b10 = encode(seg, grid(Variant::SS3D_Seg_10));
  for (int ch : {0, 1, 3, 5, 6, 7, 8, 9}) CHECK(a10.data.col(ch) == b10.data.col(ch));
}

TEST_CASE("cost model") {
  CHECK(fc_encoder_macs(12000, 100, 9, 64) == 691'200'000ULL);
  CHECK(fc_encoder_macs(1, 1, 1, 1) == 1);
  CHECK(fc_encoder_macs(2, 100, 9, 64) == 115'200);
  CHECK(statistical_encoder_flops(grid(), 0) == 0);
  CHECK(statistical_encoder_flops(grid(), 100'000) == 12 * 100'000ULL + 10 * 100'000ULL);
  CHECK(kOpsPerPoint * 100'000 == 1'200'000);
  const double ratio = double(fc_encoder_macs(12000, 100, 9, 64)) / double(statistical_encoder_flops(grid(), 100'000));
  CHECK(ratio > 100.0);
  // occupied-pillar term saturates at the grid size
  CHECK(statistical_encoder_flops(grid(), 1'000'000) == 12'000'000ULL + 10ULL * 496 * 432);
}

TEST_CASE("PFT1 layout") {
  testing::TempDir tmp;
  PillarGridConfig g;
  g.x_max = 0.32;
  g.y_min = 0.0;
  g.y_max = 0.16;
  g.variant = Variant::SS3D_6;
  const auto map = encode(make_cloud({{0.2f, 0.1f, 0.0f, 0.25f}}), g);
  write_pft1(tmp / "a.pft1", map);
  const std::string bytes = testing::slurp(tmp / "a.pft1");
  const std::string header = "PFT11 2 6 SS3D-6\n";
  REQUIRE(bytes.substr(0, header.size()) == header);
  CHECK(bytes.size() == header.size() + 1 * 2 * 6 * 4);
  // channel-fastest: pillar (0,1) channel 3 is float index 9
  float v;
  std::memcpy(&v, bytes.data() + header.size() + 9 * 4, 4);
  CHECK(v == 0.25f);
  const auto back = read_pft1(tmp / "a.pft1");
  CHECK(back.data == map.data);
  CHECK(back.variant == map.variant);
}
