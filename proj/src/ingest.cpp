// SPDX-License-Identifier: Apache-2.0
#include "pillarstat/ingest.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "pillarstat/error.hpp"

namespace pillarstat {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoFailure, "read failed: " + path.string());
  return ss.str();
}

namespace {

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open for writing " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view tok) {
  double v = 0;
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view tok) {
  int v = 0;
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

}  // namespace

// ---------------------------------------------------------------- point clouds

PointCloud make_cloud(const std::vector<Eigen::Vector4f>& rows) {
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) cloud.points.row(Eigen::Index(i)) = rows[i].transpose();
  return cloud;
}

PointCloud decode_point_cloud(const std::string& bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorKind::MalformedRecordLength,
                fmt::format("{} bytes is not a multiple of 16", bytes.size()));
  }
  const std::size_t n = bytes.size() / 16;
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(n), 4);
  Eigen::Index kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector4f p;
    for (int k = 0; k < 4; ++k) p[k] = detail::get_f32(bytes.data() + 16 * i + 4 * k);
    if (!p.allFinite()) {
      ++cloud.dropped_non_finite;
      continue;
    }
    if (p[3] < 0.0f || p[3] > 1.0f) {
      p[3] = std::clamp(p[3], 0.0f, 1.0f);
      ++cloud.clamped_v;
    }
    cloud.points.row(kept++) = p.transpose();
  }
  cloud.points.conservativeResize(kept, 4);
  return cloud;
}

PointCloud read_point_cloud(const fs::path& path) { return decode_point_cloud(read_file(path)); }

void write_point_cloud(const fs::path& path, const PointCloud& cloud) {
  std::string buf;
  buf.reserve(static_cast<std::size_t>(cloud.size()) * 16);
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    for (int k = 0; k < 4; ++k) detail::put_f32(buf, cloud.points(i, k));
  write_bytes(path, buf);
}

// ---------------------------------------------------------------- calibration

Eigen::Matrix4d Calibration::to_sensor() const { return to_camera().inverse(); }

bool Calibration::valid() const {
  auto homogeneous = [](const Eigen::Matrix4d& m) {
    return m.allFinite() && m.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 0.0) &&
           std::abs(m.topLeftCorner<3, 3>().determinant()) > 1e-12;
  };
  return focal_u > 0 && focal_v > 0 && baseline > 0 && projection.allFinite() && homogeneous(rect) &&
         homogeneous(velo_to_cam);
}

Calibration Calibration::pinhole(double focal, double cu, double cv, double baseline) {
  Calibration c;
  c.focal_u = c.focal_v = focal;
  c.center_u = cu;
  c.center_v = cv;
  c.baseline = baseline;
  c.projection << focal, 0, cu, 0, 0, focal, cv, 0, 0, 0, 1, 0;
  return c;
}

Calibration Calibration::nominal() {
  Calibration c = pinhole(721.5377, 609.5593, 172.854, 0.54);
  // x_cam = -y, y_cam = -z, z_cam = x
  c.velo_to_cam << 0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0, 0, 0, 0, 1;
  return c;
}

Calibration parse_calibration(const std::string& text, double fallback_baseline) {
  std::map<std::string, std::vector<double>, std::less<>> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    std::vector<double> values;
    for (auto tok : split_ws(std::string_view(line).substr(colon + 1))) {
      auto v = to_double(tok);
      if (!v) throw Error(ErrorKind::ParseError, fmt::format("calib key {}: bad number '{}'", key, tok), line_no);
      values.push_back(*v);
    }
    entries[key] = std::move(values);
  }

  auto fetch = [&](const char* key, std::size_t count) -> const std::vector<double>& {
    auto it = entries.find(key);
    if (it == entries.end()) throw Error(ErrorKind::MissingKey, key);
    if (it->second.size() != count) {
      throw Error(ErrorKind::MatrixShapeError,
                  fmt::format("{} has {} values, expected {}", key, it->second.size(), count));
    }
    return it->second;
  };

  Calibration c;
  const auto& p2 = fetch("P2", 12);
  c.projection = Eigen::Map<const Eigen::Matrix<double, 3, 4, Eigen::RowMajor>>(p2.data());
  c.focal_u = c.projection(0, 0);
  c.center_u = c.projection(0, 2);
  c.focal_v = c.projection(1, 1);
  c.center_v = c.projection(1, 2);

  const auto& r0 = fetch("R0_rect", 9);
  c.rect.setIdentity();
  c.rect.topLeftCorner<3, 3>() = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r0.data());

  const auto& tr = fetch("Tr_velo_to_cam", 12);
  c.velo_to_cam.setIdentity();
  c.velo_to_cam.topRows<3>() = Eigen::Map<const Eigen::Matrix<double, 3, 4, Eigen::RowMajor>>(tr.data());

  c.baseline = fallback_baseline;
  if (entries.count("P3")) {
    const auto& p3 = fetch("P3", 12);
    const double b = (c.projection(0, 3) - p3[3]) / c.focal_u;
    if (b > 0) c.baseline = b;
  }
  if (!c.valid()) throw Error(ErrorKind::MatrixShapeError, "calibration is degenerate");
  return c;
}

Calibration read_calibration(const fs::path& path, double fallback_baseline) {
  return parse_calibration(read_file(path), fallback_baseline);
}

// ---------------------------------------------------------------- labels

Box3D camera_label_to_box(const Eigen::Vector3d& bottom_center_cam, double h, double w, double l,
                          double rotation_y, const Calibration& calib) {
  const Eigen::Matrix4d to_sensor = calib.to_sensor();
  const Eigen::Vector3d center_cam = bottom_center_cam - Eigen::Vector3d(0, h / 2, 0);
  const Eigen::Vector3d heading_cam(std::cos(rotation_y), 0, -std::sin(rotation_y));
  const Eigen::Vector3d heading = to_sensor.topLeftCorner<3, 3>() * heading_cam;

  Box3D box;
  box.center = (to_sensor * center_cam.homogeneous()).head<3>();
  box.length = l;
  box.width = w;
  box.height = h;
  box.yaw = normalize_angle(std::atan2(heading.y(), heading.x()));
  return box;
}

void box_to_camera_label(const Box3D& box, const Calibration& calib, LabeledObject& out) {
  const Eigen::Matrix4d to_camera = calib.to_camera();
  const Eigen::Vector3d center_cam = (to_camera * box.center.homogeneous()).head<3>();
  const Eigen::Vector3d heading =
      to_camera.topLeftCorner<3, 3>() * Eigen::Vector3d(std::cos(box.yaw), std::sin(box.yaw), 0);
  out.dim_h = box.height;
  out.dim_w = box.width;
  out.dim_l = box.length;
  out.location_cam = center_cam + Eigen::Vector3d(0, box.height / 2, 0);
  out.rotation_y = normalize_angle(std::atan2(-heading.z(), heading.x()));
  out.alpha = normalize_angle(out.rotation_y - std::atan2(center_cam.x(), center_cam.z()));
  out.box3d = box;
}

std::optional<Rect2D> project_box_to_image(const Box3D& box, const Calibration& calib,
                                           double image_width, double image_height) {
  const Eigen::Matrix<double, 3, 4> full = calib.projection * calib.to_camera();
  const auto bev = bev_corners(box);
  double u_min = INFINITY, v_min = INFINITY, u_max = -INFINITY, v_max = -INFINITY;
  bool any = false;
  for (int k = 0; k < 8; ++k) {
    const Eigen::Vector4d corner(bev(0, k % 4), bev(1, k % 4), k < 4 ? box.z_bottom() : box.z_top(), 1);
    const Eigen::Vector3d p = full * corner;
    if (p.z() <= 0.1) continue;
    any = true;
    u_min = std::min(u_min, p.x() / p.z());
    u_max = std::max(u_max, p.x() / p.z());
    v_min = std::min(v_min, p.y() / p.z());
    v_max = std::max(v_max, p.y() / p.z());
  }
  if (!any) return std::nullopt;
  Rect2D r{std::clamp(u_min, 0.0, image_width - 1), std::clamp(v_min, 0.0, image_height - 1),
           std::clamp(u_max, 0.0, image_width - 1), std::clamp(v_max, 0.0, image_height - 1)};
  if (r.width() <= 0 || r.height() <= 0) return std::nullopt;
  return r;
}

std::vector<LabeledObject> parse_labels(const std::string& text, bool with_scores,
                                        const std::optional<Calibration>& calib) {
  const Calibration cal = calib.value_or(Calibration::nominal());
  const std::size_t expected = with_scores ? 16 : 15;
  std::vector<LabeledObject> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != expected) {
      throw Error(ErrorKind::FieldCountError,
                  fmt::format("line {}: {} fields, expected {}", line_no, tok.size(), expected), line_no);
    }
    std::array<double, 16> num{};
    for (std::size_t f = 1; f < expected; ++f) {
      if (f == 2) continue;
      auto v = to_double(tok[f]);
      if (!v) {
        throw Error(ErrorKind::ParseError, fmt::format("line {} field {}: '{}'", line_no, f + 1, tok[f]),
                    line_no);
      }
      num[f] = *v;
    }
    auto occ = to_int(tok[2]);
    if (!occ) {
      throw Error(ErrorKind::ParseError, fmt::format("line {} field 3: '{}'", line_no, tok[2]), line_no);
    }

    LabeledObject obj;
    obj.class_name = std::string(tok[0]);
    obj.truncation = num[1];
    obj.occlusion = *occ;
    obj.alpha = num[3];
    obj.box2d = {num[4], num[5], num[6], num[7]};
    obj.dim_h = num[8];
    obj.dim_w = num[9];
    obj.dim_l = num[10];
    obj.location_cam = {num[11], num[12], num[13]};
    obj.rotation_y = num[14];
    if (with_scores) obj.score = num[15];

    if (!obj.is_dont_care()) {
      auto fail = [&](const char* what) {
        throw Error(ErrorKind::ParseError, fmt::format("line {}: {}", line_no, what), line_no);
      };
      if (obj.occlusion < 0 || obj.occlusion > 3) fail("occlusion outside {0,1,2,3}");
      if (obj.box2d.x_max <= obj.box2d.x_min || obj.box2d.y_max <= obj.box2d.y_min) fail("empty 2D box");
      if (obj.dim_h <= 0 || obj.dim_w <= 0 || obj.dim_l <= 0) fail("non-positive 3D dimensions");
      obj.box3d = camera_label_to_box(obj.location_cam, obj.dim_h, obj.dim_w, obj.dim_l, obj.rotation_y, cal);
    }
    out.push_back(std::move(obj));
  }
  return out;
}

std::vector<LabeledObject> read_labels(const fs::path& path, bool with_scores,
                                       const std::optional<Calibration>& calib) {
  return parse_labels(read_file(path), with_scores, calib);
}

std::string format_label(const LabeledObject& o) {
  std::string s = fmt::format(
      "{} {:.2f} {} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f}",
      o.class_name, o.truncation, o.occlusion, o.alpha, o.box2d.x_min, o.box2d.y_min, o.box2d.x_max,
      o.box2d.y_max, o.dim_h, o.dim_w, o.dim_l, o.location_cam.x(), o.location_cam.y(), o.location_cam.z(),
      o.rotation_y);
  if (o.score) s += fmt::format(" {:.6f}", *o.score);
  return s;
}

void write_labels(const fs::path& path, const std::vector<LabeledObject>& objs) {
  std::string buf;
  for (const auto& o : objs) {
    buf += format_label(o);
    buf += '\n';
  }
  write_bytes(path, buf);
}

}  // namespace pillarstat
