// SPDX-License-Identifier: Apache-2.0
//
// Reference encoder. Deliberately naive: membership is decided by scanning
// the explicit edge lists, points are grouped into per-pillar lists, and
// every statistic is recomputed from its list.
#include <cmath>
#include <map>
#include <vector>

#include "pillarstat/pillar_encoder.hpp"

namespace pillarstat {

namespace {

std::vector<double> edges(double lo, double cell, int n) {
  std::vector<double> e(std::size_t(n) + 1);
  for (int k = 0; k <= n; ++k) e[std::size_t(k)] = lo + k * cell;
  return e;
}

int scan(const std::vector<double>& e, double v) {
  for (std::size_t k = 0; k + 1 < e.size(); ++k) {
    if (e[k] <= v && v < e[k + 1]) return int(k);
  }
  return -1;
}

}  // namespace

FeatureMap encode_oracle(const PointCloud& cloud, const PillarGridConfig& cfg) {
  cfg.validate();
  const int H = cfg.height(), W = cfg.width();
  const auto xs = edges(cfg.x_min, cfg.cell, W);
  const auto ys = edges(cfg.y_min, cfg.cell, H);

  std::map<std::pair<int, int>, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double z = cloud.points(i, 2);
    if (z < cfg.z_min || z > cfg.z_max) continue;
    const int col = scan(xs, cloud.points(i, 0));
    const int row = scan(ys, cloud.points(i, 1));
    if (col >= 0 && row >= 0) members[{row, col}].push_back(i);
  }

  const double h = cfg.z_max - cfg.z_min;
  const std::array<double, 4> planes{cfg.z_min, cfg.z_min + h / 3, cfg.z_min + 2 * h / 3, cfg.z_max};

  FeatureMap map(H, W, cfg.variant);
  for (const auto& [cell, idx] : members) {
    const auto [row, col] = cell;
    PillarStats st;
    st.count = static_cast<std::int64_t>(idx.size());

    double sum_z = 0, sum_v = 0;
    for (auto i : idx) sum_z += double(cloud.points(i, 2));
    for (auto i : idx) sum_v += double(cloud.points(i, 3));
    st.mean_height = sum_z / double(idx.size());
    st.mean_v = sum_v / double(idx.size());

    Eigen::Index top = idx.front();
    for (auto i : idx) {
      if (cloud.points(i, 2) >= cloud.points(top, 2)) top = i;
    }
    st.max_height = cloud.points(top, 2);
    st.v_of_highest = cloud.points(top, 3);

    for (int s = 0; s < 3; ++s) {
      bool any = false;
      double best = 0;
      for (auto i : idx) {
        const double z = cloud.points(i, 2);
        const bool inside = s < 2 ? (planes[s] <= z && z < planes[s + 1]) : (planes[2] <= z && z <= planes[3]);
        if (inside && (!any || z > best)) {
          best = z;
          any = true;
        }
      }
      st.slice_max_heights[std::size_t(s)] = any ? best : 0.0;
    }

    const double xc = (xs[std::size_t(col)] + xs[std::size_t(col) + 1]) / 2;
    const double yc = (ys[std::size_t(row)] + ys[std::size_t(row) + 1]) / 2;
    st.center_distance = std::hypot(xc, yc);
    st.center_angle = std::atan2(yc, xc);
    write_channels(st, cfg.variant, map.pillar(row, col));
  }
  return map;
}

}  // namespace pillarstat
