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

#ifndef ADVSIM_GEOMETRY_HPP_
#define ADVSIM_GEOMETRY_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace advsim::geom
{

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2
{
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline Vec2 operator*(Vec2 v, double s) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
// z component of the 3D cross product; positive when b lies left of a.
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Planar pose. Heading is stored normalized to (-pi, pi].
struct Pose2
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
};

struct BoxSize
{
  double length = 0.0;
  double width = 0.0;
};

/// Axis-aligned-in-body rectangle: `length` spans the heading axis, `width`
/// the perpendicular one. Callers keep length >= width > 0 for vehicles.
struct OrientedBox
{
  Pose2 center;
  double length = 0.0;
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Closed-set overlap test via the separating axis theorem over the four
/// candidate edge normals. Boxes that merely touch count as overlapping.
bool obb_overlap(const OrientedBox & a, const OrientedBox & b);

/// Exact clearance between two boxes: positive values are the Euclidean gap
/// (minimum over boundary segment pairs), negative values are the penetration
/// depth (minimum translation along an edge normal), zero means touching.
double obb_signed_gap(const OrientedBox & a, const OrientedBox & b);

/// Earliest index k at which the two box trajectories overlap, scanning the
/// aligned pose sequences step by step. Throws ErrorCode::argument when the
/// sequences have different lengths.
std::optional<std::size_t> earliest_collision_step(
  std::span<const Pose2> traj_a, BoxSize dims_a,
  std::span<const Pose2> traj_b, BoxSize dims_b);

struct PolylineProjection
{
  double arc_length = 0.0;      // clamped to [0, total length]
  double lateral_offset = 0.0;  // signed, left of travel direction positive
};

/// Piecewise-linear curve with at least two points and no coincident
/// consecutive vertices. Cumulative arc lengths are precomputed.
class Polyline
{
public:
  explicit Polyline(std::vector<Vec2> points);

  std::span<const Vec2> points() const { return points_; }
  double length() const { return cumulative_.back(); }
  std::size_t segment_count() const { return points_.size() - 1; }
  double arc_at_vertex(std::size_t i) const { return cumulative_[i]; }

  /// Point at clamped arc-length position.
  Vec2 point_at_arc(double arc) const;
  /// Tangent heading of the segment containing the clamped arc position.
  double heading_at_arc(double arc) const;

private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

/// Nearest-point projection. Beyond either end the arc length clamps while
/// the lateral offset is measured against the extension of the end segment,
/// so the Frenet frame stays continuous past the endpoints.
PolylineProjection project_to_polyline(Vec2 point, const Polyline & line);

/// De Casteljau evaluation of the Bezier curve whose control points are
/// `control`, at parameter t in [0, 1]. Endpoints are reproduced exactly.
Vec2 bezier_point(std::span<const Vec2> control, double t);

/// Single Bezier curve through all waypoints (as control points), sampled at
/// `samples` uniformly spaced parameters. Requires >= 2 waypoints and
/// samples >= 2.
Polyline bezier_fit(std::span<const Vec2> waypoints, std::size_t samples);

/// First hit of a ray against a segment, as distance along the ray.
std::optional<double> ray_segment_intersection(
  Vec2 origin, Vec2 direction, Vec2 seg_a, Vec2 seg_b);

}  // namespace advsim::geom

#endif  // ADVSIM_GEOMETRY_HPP_
