// SPDX-License-Identifier: Apache-2.0
//
// Oriented boxes and overlap measures. Everything here is header-only and
// templated on the scalar type; Box3D / Detection are the double instances
// used across the rest of the library.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace pillarstat {

template <typename Scalar>
constexpr Scalar kPi = Scalar(3.14159265358979323846264338327950288L);

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_angle(Scalar a) {
  Scalar r = std::remainder(a, Scalar(2) * kPi<Scalar>);
  if (r <= -kPi<Scalar>) r += Scalar(2) * kPi<Scalar>;
  return r;
}

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Oriented box in the sensor frame. `length` runs along the heading `yaw`,
/// `width` across it; `center.z()` is the geometric center.
template <typename Scalar>
struct Box3 {
  Vec3<Scalar> center = Vec3<Scalar>::Zero();
  Scalar length = 1;
  Scalar width = 1;
  Scalar height = 1;
  Scalar yaw = 0;

  bool valid() const {
    return center.allFinite() && std::isfinite(yaw) && length > 0 && width > 0 && height > 0;
  }
  Scalar bev_area() const { return length * width; }
  Scalar volume() const { return length * width * height; }
  Scalar z_bottom() const { return center.z() - height / 2; }
  Scalar z_top() const { return center.z() + height / 2; }
};

using Box3D = Box3<double>;

/// Axis-aligned rectangle, min corner inclusive.
template <typename Scalar>
struct Rect {
  Scalar x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return std::max(Scalar(0), width()) * std::max(Scalar(0), height()); }
};

using Rect2D = Rect<double>;

struct Detection {
  Box3D box;
  std::string class_name;
  double score = 0;
};

/// Corners of the BEV footprint, counter-clockwise, as columns.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 4> bev_corners(const Box3<Scalar>& box) {
  Eigen::Matrix<Scalar, 2, 4> local;
  const Scalar hl = box.length / 2, hw = box.width / 2;
  // clang-format off
  local << hl, -hl, -hl,  hl,
           hw,  hw, -hw, -hw;
  // clang-format on
  const Scalar c = std::cos(box.yaw), s = std::sin(box.yaw);
  Eigen::Matrix<Scalar, 2, 2> rot;
  rot << c, -s, s, c;
  return (rot * local).colwise() + box.center.template head<2>();
}

namespace detail {

template <typename Scalar>
Scalar cross2(const Vec2<Scalar>& a, const Vec2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

template <typename Scalar>
Scalar polygon_area(const std::vector<Vec2<Scalar>>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0;
  Scalar twice = 0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) twice += cross2(poly[j], poly[i]);
  return twice / 2;
}

}  // namespace detail

/// Sutherland–Hodgman: clips `subject` by the convex CCW polygon `clip`.
template <typename Scalar>
std::vector<Vec2<Scalar>> clip_convex(std::vector<Vec2<Scalar>> subject,
                                      const std::vector<Vec2<Scalar>>& clip) {
  std::vector<Vec2<Scalar>> input;
  const std::size_t m = clip.size();
  for (std::size_t e1 = m - 1, e2 = 0; e2 < m && !subject.empty(); e1 = e2++) {
    const Vec2<Scalar> a = clip[e1];
    const Vec2<Scalar> edge = clip[e2] - a;
    input.swap(subject);
    subject.clear();
    const std::size_t n = input.size();
    for (std::size_t v1 = n - 1, v2 = 0; v2 < n; v1 = v2++) {
      const Vec2<Scalar>& p = input[v1];
      const Vec2<Scalar>& q = input[v2];
      const Scalar sp = detail::cross2<Scalar>(edge, p - a);
      const Scalar sq = detail::cross2<Scalar>(edge, q - a);
      const bool p_in = sp >= 0, q_in = sq >= 0;
      if (p_in != q_in) {
        const Scalar t = sp / (sp - sq);
        subject.push_back(p + t * (q - p));
      }
      if (q_in) subject.push_back(q);
    }
  }
  return subject;
}

/// BEV intersection area of two oriented rectangles.
template <typename Scalar>
Scalar bev_intersection_area(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  // Cheap reject on circumscribed circles.
  const Scalar ra = std::hypot(a.length, a.width) / 2, rb = std::hypot(b.length, b.width) / 2;
  if ((a.center.template head<2>() - b.center.template head<2>()).norm() > ra + rb) return 0;

  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Vec2<Scalar>> pa, pb;
  for (int i = 0; i < 4; ++i) {
    pa.emplace_back(ca.col(i));
    pb.emplace_back(cb.col(i));
  }
  const Scalar area = detail::polygon_area(clip_convex(std::move(pa), pb));
  return area > Scalar(1e-12) ? area : Scalar(0);
}

template <typename Scalar>
Scalar iou_bev(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0;
  const Scalar uni = a.bev_area() + b.bev_area() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Length of the overlap of the two vertical extents.
template <typename Scalar>
Scalar vertical_overlap(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  return std::max(Scalar(0), std::min(a.z_top(), b.z_top()) - std::max(a.z_bottom(), b.z_bottom()));
}

template <typename Scalar>
Scalar iou_3d(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar dz = vertical_overlap(a, b);
  if (dz <= 0) return 0;
  const Scalar inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0) return 0;
  const Scalar uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar iou_2d_axis_aligned(const Rect<Scalar>& a, const Rect<Scalar>& b) {
  const Scalar iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0;
  const Scalar inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Axis-aligned BEV footprint with length/width swapped to whichever of
/// yaw 0 or yaw pi/2 is nearer.
template <typename Scalar>
Rect<Scalar> nearest_standup_footprint(const Box3<Scalar>& box) {
  Scalar r = std::abs(normalize_angle(box.yaw));
  if (r > kPi<Scalar> / 2) r = kPi<Scalar> - r;
  const bool swap = r > kPi<Scalar> / 4;
  const Scalar ex = (swap ? box.width : box.length) / 2;
  const Scalar ey = (swap ? box.length : box.width) / 2;
  return {box.center.x() - ex, box.center.y() - ey, box.center.x() + ex, box.center.y() + ey};
}

/// Greedy rotated NMS over BEV IoU. Survivors are returned by descending
/// score; equal scores keep input order.
inline std::vector<Detection> nms_bev(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou_bev(k.box, cand.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace pillarstat
