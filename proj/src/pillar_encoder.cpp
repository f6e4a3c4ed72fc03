// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/pillar_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "pillarstat/error.hpp"

namespace pillarstat {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::SS3D_6: return "SS3D-6";
    case Variant::SS3D_10: return "SS3D-10";
    case Variant::SS3D_Seg_6: return "SS3D-Seg-6";
    case Variant::SS3D_Seg_10: return "SS3D-Seg-10";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const std::string wanted = lower(name);
  for (Variant v : {Variant::SS3D_6, Variant::SS3D_10, Variant::SS3D_Seg_6, Variant::SS3D_Seg_10}) {
    if (lower(variant_name(v)) == wanted) return v;
  }
  return std::nullopt;
}

int variant_channels(Variant v) {
  return (v == Variant::SS3D_6 || v == Variant::SS3D_Seg_6) ? 6 : 10;
}

namespace {

int cells_along(double lo, double hi, double cell) {
  const double q = (hi - lo) / cell;
  const double r = std::round(q);
  if (!(cell > 0) || !(r >= 1) || std::abs(q - r) > 1e-9 || r > 1e7) return -1;
  return static_cast<int>(r);
}

// Cell k spans [lo + k·cell, lo + (k+1)·cell). The floor-divide guess is
// moved by at most one cell so it agrees with those edges exactly.
int index_along(double v, double lo, double cell, int n) {
  const double q = std::floor((v - lo) / cell);
  if (!(q >= -1.0 && q <= double(n))) return -1;
  int k = static_cast<int>(q);
  if (v < lo + k * cell) {
    --k;
  } else if (v >= lo + (k + 1) * cell) {
    ++k;
  }
  return (k >= 0 && k < n) ? k : -1;
}

}  // namespace

int PillarGridConfig::width() const { return cells_along(x_min, x_max, cell); }
int PillarGridConfig::height() const { return cells_along(y_min, y_max, cell); }

void PillarGridConfig::validate() const {
  if (!(cell > 0)) throw Error(ErrorKind::ConfigError, "grid.cell must be positive");
  if (width() < 0 || height() < 0) {
    throw Error(ErrorKind::ConfigError,
                fmt::format("grid ranges [{}, {}) x [{}, {}) are not whole multiples of cell {}", x_min,
                            x_max, y_min, y_max, cell));
  }
  if (!(z_max > z_min)) throw Error(ErrorKind::ConfigError, "grid.z_max must exceed grid.z_min");
}

std::optional<PillarIndex> pillar_index(double x, double y, const PillarGridConfig& cfg) {
  const int col = index_along(x, cfg.x_min, cfg.cell, cfg.width());
  const int row = index_along(y, cfg.y_min, cfg.cell, cfg.height());
  if (col < 0 || row < 0) return std::nullopt;
  return PillarIndex{row, col};
}

namespace {

struct Accumulator {
  std::int64_t count = 0;
  double sum_z = 0;
  double sum_v = 0;
  double max_z = -std::numeric_limits<double>::infinity();
  double v_of_max = 0;
  std::array<double, 3> slice_max{0, 0, 0};
  std::array<bool, 3> slice_seen{false, false, false};
};

}  // namespace

FeatureMap encode(const PointCloud& cloud, const PillarGridConfig& cfg, EncodeSummary* summary) {
  cfg.validate();
  const int H = cfg.height(), W = cfg.width();
  FeatureMap map(H, W, cfg.variant);

  const double h3 = cfg.pillar_height() / 3;
  const double cut1 = cfg.z_min + h3, cut2 = cfg.z_min + 2 * h3;

  std::vector<std::int32_t> slot(std::size_t(H) * W, -1);
  std::vector<Accumulator> acc;
  std::vector<std::int32_t> cell_of;  // flat pillar index per accumulator

  std::int64_t in_range = 0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double x = cloud.points(i, 0), y = cloud.points(i, 1), z = cloud.points(i, 2);
    const double v = cloud.points(i, 3);
    if (!(z >= cfg.z_min && z <= cfg.z_max)) continue;
    const int col = index_along(x, cfg.x_min, cfg.cell, W);
    if (col < 0) continue;
    const int row = index_along(y, cfg.y_min, cfg.cell, H);
    if (row < 0) continue;
    ++in_range;

    const std::int32_t flat = row * W + col;
    std::int32_t& s = slot[std::size_t(flat)];
    if (s < 0) {
      s = static_cast<std::int32_t>(acc.size());
      acc.emplace_back();
      cell_of.push_back(flat);
    }
    Accumulator& a = acc[std::size_t(s)];
    ++a.count;
    a.sum_z += z;
    a.sum_v += v;
    if (z >= a.max_z) {  // ties: later point wins
      a.max_z = z;
      a.v_of_max = v;
    }
    const int k = z < cut1 ? 0 : (z < cut2 ? 1 : 2);
    if (!a.slice_seen[k] || z > a.slice_max[k]) a.slice_max[k] = z;
    a.slice_seen[k] = true;
  }

  for (std::size_t s = 0; s < acc.size(); ++s) {
    const Accumulator& a = acc[s];
    const int row = cell_of[s] / W, col = cell_of[s] % W;
    PillarStats st;
    st.count = a.count;
    st.mean_height = a.sum_z / double(a.count);
    st.mean_v = a.sum_v / double(a.count);
    st.max_height = a.max_z;
    st.v_of_highest = a.v_of_max;
    st.slice_max_heights = a.slice_max;
    const double xc = cfg.x_min + (col + 0.5) * cfg.cell;
    const double yc = cfg.y_min + (row + 0.5) * cfg.cell;
    st.center_distance = std::sqrt(xc * xc + yc * yc);
    st.center_angle = std::atan2(yc, xc);
    write_channels(st, cfg.variant, map.pillar(row, col));
  }

  if (summary) {
    summary->points = cloud.size();
    summary->in_range = in_range;
    summary->occupied = static_cast<std::int64_t>(acc.size());
  }
  return map;
}

std::uint64_t fc_encoder_macs(std::uint64_t num_pillars, std::uint64_t points_per_pillar,
                              std::uint64_t in_features, std::uint64_t out_features) {
  return num_pillars * points_per_pillar * in_features * out_features;
}

std::uint64_t statistical_encoder_flops(const PillarGridConfig& cfg, std::uint64_t n_points) {
  const std::uint64_t pillars = std::uint64_t(std::max(0, cfg.width())) * std::uint64_t(std::max(0, cfg.height()));
  return kOpsPerPoint * n_points + kOpsPerPillar * std::min(n_points, pillars);
}

// ---------------------------------------------------------------- PFT1

std::string serialize_pft1(const FeatureMap& map) {
  std::string buf = "PFT1";
  buf += fmt::format("{} {} {} {}\n", map.height, map.width, map.channels(), variant_name(map.variant));
  buf.reserve(buf.size() + std::size_t(map.data.size()) * 4);
  const float* p = map.data.data();
  for (Eigen::Index i = 0; i < map.data.size(); ++i) detail::put_f32(buf, p[i]);
  return buf;
}

void write_pft1(const std::filesystem::path& path, const FeatureMap& map) {
  const std::string buf = serialize_pft1(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open for writing " + path.string());
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

FeatureMap read_pft1(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.compare(0, 4, "PFT1") != 0) throw Error(ErrorKind::UnsupportedFormat, "missing PFT1 magic");
  const auto eol = bytes.find('\n', 4);
  if (eol == std::string::npos) throw Error(ErrorKind::UnsupportedFormat, "missing PFT1 header line");
  std::istringstream header(bytes.substr(4, eol - 4));
  int h = 0, w = 0, c = 0;
  std::string name;
  header >> h >> w >> c >> name;
  const auto variant = parse_variant(name);
  if (!header || !variant || h <= 0 || w <= 0 || c != variant_channels(*variant)) {
    throw Error(ErrorKind::UnsupportedFormat, "bad PFT1 header");
  }
  const std::size_t n = std::size_t(h) * w * c;
  if (bytes.size() - eol - 1 != n * 4) throw Error(ErrorKind::MalformedRecordLength, "PFT1 payload size");
  FeatureMap map(h, w, *variant);
  float* p = map.data.data();
  for (std::size_t i = 0; i < n; ++i) p[i] = detail::get_f32(bytes.data() + eol + 1 + 4 * i);
  return map;
}

}  // namespace pillarstat
