// SPDX-License-Identifier: Apache-2.0
//
// Statistical pillar features over a bird's-eye-view grid.
//
// Rows index the lateral axis (y), columns the forward axis (x). A cell
// [min + k·cell, min + (k+1)·cell) is closed below and open above in x and
// y; the vertical range is closed at both ends.
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "pillarstat/ingest.hpp"

namespace pillarstat {

enum class Variant { SS3D_6, SS3D_10, SS3D_Seg_6, SS3D_Seg_10 };

std::string_view variant_name(Variant v);
/// Accepts the canonical names (e.g. "SS3D-Seg-10"), case-insensitively.
std::optional<Variant> parse_variant(std::string_view name);
int variant_channels(Variant v);

struct PillarGridConfig {
  double x_min = 0.0, x_max = 69.12;
  double y_min = -39.68, y_max = 39.68;
  double z_min = -3.0, z_max = 1.0;
  double cell = 0.16;
  Variant variant = Variant::SS3D_6;

  int width() const;   // columns along x
  int height() const;  // rows along y
  double pillar_height() const { return z_max - z_min; }
  /// Throws ConfigError when the ranges are not whole multiples of cell.
  void validate() const;

  double x_edge(int col) const { return x_min + col * cell; }
  double y_edge(int row) const { return y_min + row * cell; }
};

struct PillarIndex {
  int row = 0;
  int col = 0;
  bool operator==(const PillarIndex&) const = default;
};

/// Cell containing (x, y), or nullopt outside the grid. z is not checked.
std::optional<PillarIndex> pillar_index(double x, double y, const PillarGridConfig& cfg);

/// Dense H×W×C tensor stored as (H·W)×C, row-major and channel-fastest.
struct FeatureMap {
  using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int height = 0;
  int width = 0;
  Variant variant = Variant::SS3D_6;
  Storage data;

  FeatureMap() = default;
  FeatureMap(int h, int w, Variant v) : height(h), width(w), variant(v), data(Storage::Zero(Eigen::Index(h) * w, variant_channels(v))) {}

  int channels() const { return static_cast<int>(data.cols()); }
  float& at(int row, int col, int ch) { return data(Eigen::Index(row) * width + col, ch); }
  float at(int row, int col, int ch) const { return data(Eigen::Index(row) * width + col, ch); }
  auto pillar(int row, int col) { return data.row(Eigen::Index(row) * width + col); }
  auto pillar(int row, int col) const { return data.row(Eigen::Index(row) * width + col); }
};

/// Per-pillar statistics before channel layout.
struct PillarStats {
  std::int64_t count = 0;
  double mean_height = 0;
  double mean_v = 0;
  double max_height = 0;
  double v_of_highest = 0;
  std::array<double, 3> slice_max_heights{0, 0, 0};
  double center_distance = 0;
  double center_angle = 0;
};

/// Writes the channel vector of a variant into `out` (length 6 or 10).
template <typename Row>
void write_channels(const PillarStats& s, Variant variant, Row&& out) {
  if (variant_channels(variant) == 6) {
    out << 1.0f, float(s.count), float(s.mean_height), float(s.mean_v), float(s.max_height),
        float(s.v_of_highest);
  } else {
    out << float(s.count), float(s.mean_height), float(s.mean_v), float(s.max_height),
        float(s.v_of_highest), float(s.center_distance), float(s.center_angle),
        float(s.slice_max_heights[0]), float(s.slice_max_heights[1]),
        float(s.slice_max_heights[2]);
  }
}

struct EncodeSummary {
  std::int64_t points = 0;
  std::int64_t in_range = 0;
  std::int64_t occupied = 0;
};

FeatureMap encode(const PointCloud& cloud, const PillarGridConfig& cfg,
                  EncodeSummary* summary = nullptr);

/// Independent reference for encode: per-point linear scans over the cell
/// edges, explicit per-pillar point lists, statistics from the lists.
FeatureMap encode_oracle(const PointCloud& cloud, const PillarGridConfig& cfg);

/// MAC count of a per-point fully connected pillar encoder.
std::uint64_t fc_encoder_macs(std::uint64_t num_pillars, std::uint64_t points_per_pillar,
                              std::uint64_t in_features, std::uint64_t out_features);

/// Operation-count model of encode: kOpsPerPoint per point plus
/// kOpsPerPillar per occupied pillar, bounded by min(n_points, H·W).
inline constexpr std::uint64_t kOpsPerPoint = 12;
inline constexpr std::uint64_t kOpsPerPillar = 10;
std::uint64_t statistical_encoder_flops(const PillarGridConfig& cfg, std::uint64_t n_points);

// PFT1: "PFT1", "H W C variant\n", then H·W·C little-endian f32.
void write_pft1(const std::filesystem::path& path, const FeatureMap& map);
std::string serialize_pft1(const FeatureMap& map);
FeatureMap read_pft1(const std::filesystem::path& path);

}  // namespace pillarstat
