// Copyright 2026 The advsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "advsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advsim/errors.hpp"

namespace advsim::geom
{

namespace
{

struct Interval
{
  double lo;
  double hi;
};

Interval project_corners(const std::array<Vec2, 4> & corners, Vec2 axis)
{
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Vec2 & c : corners) {
    const double d = dot(c, axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

// Separation of the two projected intervals along `axis`; positive means a
// gap, negative the overlap depth on that axis.
double axis_separation(
  const std::array<Vec2, 4> & ca, const std::array<Vec2, 4> & cb, Vec2 axis)
{
  const Interval ia = project_corners(ca, axis);
  const Interval ib = project_corners(cb, axis);
  return std::max(ib.lo - ia.hi, ia.lo - ib.hi);
}

std::array<Vec2, 2> box_axes(const OrientedBox & b)
{
  const double c = std::cos(b.center.heading);
  const double s = std::sin(b.center.heading);
  return {Vec2{c, s}, Vec2{-s, c}};
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b)
{
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

double segment_segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1)
{
  // Proper crossing means distance zero.
  const Vec2 da = a1 - a0;
  const Vec2 db = b1 - b0;
  const double denom = cross(da, db);
  if (std::abs(denom) > 1e-15) {
    const double t = cross(b0 - a0, db) / denom;
    const double u = cross(b0 - a0, da) / denom;
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
      return 0.0;
    }
  }
  return std::min(
    std::min(point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1)),
    std::min(point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)));
}

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double normalize_angle(double radians)
{
  double a = std::remainder(radians, 2.0 * kPi);
  if (a <= -kPi) {
    a += 2.0 * kPi;
  }
  return a;
}

std::array<Vec2, 4> OrientedBox::corners() const
{
  const auto axes = box_axes(*this);
  const Vec2 ax = (length * 0.5) * axes[0];
  const Vec2 ay = (width * 0.5) * axes[1];
  const Vec2 c = center.position();
  return {c + ax + ay, c + ax - ay, c - ax - ay, c - ax + ay};
}

bool obb_overlap(const OrientedBox & a, const OrientedBox & b)
{
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto axes_a = box_axes(a);
  const auto axes_b = box_axes(b);
  for (const Vec2 & axis : {axes_a[0], axes_a[1], axes_b[0], axes_b[1]}) {
    if (axis_separation(ca, cb, axis) > 0.0) {
      return false;
    }
  }
  return true;
}

double obb_signed_gap(const OrientedBox & a, const OrientedBox & b)
{
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto axes_a = box_axes(a);
  const auto axes_b = box_axes(b);
  double best_separation = -std::numeric_limits<double>::infinity();
  for (const Vec2 & axis : {axes_a[0], axes_a[1], axes_b[0], axes_b[1]}) {
    best_separation = std::max(best_separation, axis_separation(ca, cb, axis));
  }
  if (best_separation <= 0.0) {
    // Overlapping; the least-overlapped edge normal gives the penetration.
    return best_separation;
  }
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      gap = std::min(
        gap, segment_segment_distance(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]));
    }
  }
  return gap;
}

std::optional<std::size_t> earliest_collision_step(
  std::span<const Pose2> traj_a, BoxSize dims_a,
  std::span<const Pose2> traj_b, BoxSize dims_b)
{
  if (traj_a.size() != traj_b.size()) {
    fail(ErrorCode::argument, "earliest_collision_step: misaligned horizons");
  }
  for (std::size_t k = 0; k < traj_a.size(); ++k) {
    const OrientedBox box_a{traj_a[k], dims_a.length, dims_a.width};
    const OrientedBox box_b{traj_b[k], dims_b.length, dims_b.width};
    if (obb_overlap(box_a, box_b)) {
      return k;
    }
  }
  return std::nullopt;
}

Polyline::Polyline(std::vector<Vec2> points)
: points_(std::move(points))
{
  if (points_.size() < 2) {
    fail(ErrorCode::invariant, "polyline needs at least 2 points");
  }
  cumulative_.reserve(points_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = distance(points_[i - 1], points_[i]);
    if (d <= 1e-9) {
      fail(ErrorCode::invariant, "polyline has coincident consecutive points");
    }
    cumulative_.push_back(cumulative_.back() + d);
  }
}

Vec2 Polyline::point_at_arc(double arc) const
{
  const double s = std::clamp(arc, 0.0, length());
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = it == cumulative_.begin() ? 0 : (it - cumulative_.begin()) - 1;
  i = std::min(i, points_.size() - 2);
  const double seg_len = cumulative_[i + 1] - cumulative_[i];
  const double t = (s - cumulative_[i]) / seg_len;
  return points_[i] + t * (points_[i + 1] - points_[i]);
}

double Polyline::heading_at_arc(double arc) const
{
  const double s = std::clamp(arc, 0.0, length());
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = it == cumulative_.begin() ? 0 : (it - cumulative_.begin()) - 1;
  i = std::min(i, points_.size() - 2);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

PolylineProjection project_to_polyline(Vec2 point, const Polyline & line)
{
  const auto pts = line.points();
  double best_dist = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  double best_t = 0.0;
  double best_u = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 seg = pts[i + 1] - pts[i];
    const double u = dot(point - pts[i], seg) / dot(seg, seg);
    const double t = std::clamp(u, 0.0, 1.0);
    const double d = distance(point, pts[i] + t * seg);
    if (d < best_dist) {
      best_dist = d;
      best_i = i;
      best_t = t;
      best_u = u;
    }
  }
  const Vec2 seg = pts[best_i + 1] - pts[best_i];
  const double seg_len = distance(pts[best_i], pts[best_i + 1]);
  const Vec2 dir = (1.0 / seg_len) * seg;
  const double side = cross(dir, point - pts[best_i]);

  PolylineProjection out;
  out.arc_length = std::clamp(
    line.arc_at_vertex(best_i) + best_t * seg_len, 0.0, line.length());
  const bool past_start = best_i == 0 && best_u < 0.0;
  const bool past_end = best_i + 2 == pts.size() && best_u > 1.0;
  if (past_start || past_end) {
    // Lateral offset against the end segment's extension.
    out.lateral_offset = side;
  } else {
    out.lateral_offset = side >= 0.0 ? best_dist : -best_dist;
  }
  return out;
}

Vec2 bezier_point(std::span<const Vec2> control, double t)
{
  if (control.empty()) {
    fail(ErrorCode::argument, "bezier_point: no control points");
  }
  std::vector<Vec2> scratch(control.begin(), control.end());
  for (std::size_t level = scratch.size() - 1; level > 0; --level) {
    for (std::size_t i = 0; i < level; ++i) {
      // (1-t)*a + t*b reproduces the endpoints exactly at t=0 and t=1.
      scratch[i] = (1.0 - t) * scratch[i] + t * scratch[i + 1];
    }
  }
  return scratch[0];
}

Polyline bezier_fit(std::span<const Vec2> waypoints, std::size_t samples)
{
  if (waypoints.size() < 2) {
    fail(ErrorCode::argument, "bezier_fit: need at least 2 waypoints");
  }
  if (samples < 2) {
    fail(ErrorCode::argument, "bezier_fit: need at least 2 samples");
  }
  std::vector<Vec2> pts;
  pts.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(samples - 1);
    pts.push_back(bezier_point(waypoints, t));
  }
  return Polyline(std::move(pts));
}

std::optional<double> ray_segment_intersection(
  Vec2 origin, Vec2 direction, Vec2 seg_a, Vec2 seg_b)
{
  const Vec2 seg = seg_b - seg_a;
  const double denom = cross(direction, seg);
  if (std::abs(denom) < 1e-15) {
    return std::nullopt;
  }
  const Vec2 diff = seg_a - origin;
  const double t = cross(diff, seg) / denom;
  const double u = cross(diff, direction) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) {
    return std::nullopt;
  }
  return t;
}

}  // namespace advsim::geom
