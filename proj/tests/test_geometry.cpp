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

#include <cmath>
#include <random>
#include <vector>

#include "advsim/errors.hpp"
#include "advsim/geometry.hpp"
#include "doctest.h"
#include "testutil.hpp"

using advsim::Error;
using advsim::ErrorCode;
using namespace advsim::geom;

TEST_CASE("normalize_angle wraps into (-pi, pi]")
{
  CHECK(normalize_angle(0.0) == doctest::Approx(0.0));
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(2.5 * kPi) == doctest::Approx(0.5 * kPi));
  CHECK(normalize_angle(-0.5 * kPi) == doctest::Approx(-0.5 * kPi));
}

TEST_CASE("obb_overlap pinned cases")
{
  const OrientedBox unit_a{{0.0, 0.0, 0.0}, 1.0, 1.0};
  CHECK(obb_overlap(unit_a, unit_a));

  const OrientedBox unit_far{{10.0, 0.0, 0.0}, 1.0, 1.0};
  CHECK_FALSE(obb_overlap(unit_a, unit_far));
  CHECK_FALSE(obb_overlap(unit_far, unit_a));

  // Rotated neighbor: nearest corner sits at 2.5 - sqrt(2) > 1 from origin.
  const OrientedBox two_a{{0.0, 0.0, 0.0}, 2.0, 2.0};
  const OrientedBox two_b{{2.5, 0.0, kPi / 4.0}, 2.0, 2.0};
  CHECK_FALSE(obb_overlap(two_a, two_b));

  // Touching edges count as overlap.
  const OrientedBox touch{{1.0, 0.0, 0.0}, 1.0, 1.0};
  CHECK(obb_overlap(unit_a, touch));
}

TEST_CASE("obb_signed_gap matches configuration")
{
  const OrientedBox a{{0.0, 0.0, 0.0}, 2.0, 2.0};
  const OrientedBox apart{{5.0, 0.0, 0.0}, 2.0, 2.0};
  CHECK(obb_signed_gap(a, apart) == doctest::Approx(3.0));
  const OrientedBox overlapping{{1.0, 0.0, 0.0}, 2.0, 2.0};
  CHECK(obb_signed_gap(a, overlapping) == doctest::Approx(-1.0));
  const OrientedBox diagonal{{3.0, 3.0, 0.0}, 2.0, 2.0};
  // Corner (1,1) to corner (2,2): longer than any single-axis separation.
  CHECK(obb_signed_gap(a, diagonal) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("obb_overlap is symmetric and rigid-transform invariant")
{
  std::mt19937_64 rng(7);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  int checked = 0;
  while (checked < 400) {
    const OrientedBox a = testutil::random_box(rng, 4.0);
    const OrientedBox b = testutil::random_box(rng, 4.0);
    // Skip near-degenerate contacts where a 1e-9 perturbation could flip the
    // answer; the invariance claim holds away from the boundary.
    if (std::abs(obb_signed_gap(a, b)) < 1e-6) {
      continue;
    }
    ++checked;
    const bool direct = obb_overlap(a, b);
    CHECK(obb_overlap(b, a) == direct);

    const double angle = (unit() * 2.0 - 1.0) * kPi;
    const double tx = (unit() * 2.0 - 1.0) * 50.0;
    const double ty = (unit() * 2.0 - 1.0) * 50.0;
    auto moved = [&](const OrientedBox & box) {
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      OrientedBox out = box;
      out.center.x = c * box.center.x - s * box.center.y + tx;
      out.center.y = s * box.center.x + c * box.center.y + ty;
      out.center.heading = normalize_angle(box.center.heading + angle);
      return out;
    };
    CHECK(obb_overlap(moved(a), moved(b)) == direct);
  }
}

TEST_CASE("obb_overlap agrees with the containment-sampling oracle")
{
  std::mt19937_64 rng(11);
  int sampled = 0;
  int agreed = 0;
  while (sampled < 800) {
    const OrientedBox a = testutil::random_box(rng, 3.0);
    const OrientedBox b = testutil::random_box(rng, 3.0);
    if (std::abs(obb_signed_gap(a, b)) <= 0.02) {
      continue;
    }
    ++sampled;
    if (obb_overlap(a, b) == testutil::sampled_overlap(a, b)) {
      ++agreed;
    }
  }
  CHECK(agreed >= 799);  // >= 99.9%
}

TEST_CASE("earliest_collision_step head-on closing at 20 m/s")
{
  // Two 4 m long vehicles, centers 30 m apart, driving at each other at
  // 10 m/s, sampled at 0.1 s. Center distance at step k is 30 - 2k, and the
  // boxes touch when it reaches 4, so the first overlap is at k = 13.
  std::vector<Pose2> a;
  std::vector<Pose2> b;
  for (int k = 0; k < 40; ++k) {
    a.push_back({k * 1.0, 0.0, 0.0});
    b.push_back({30.0 - k * 1.0, 0.0, kPi});
  }
  const BoxSize dims{4.0, 1.8};
  const auto hit = earliest_collision_step(a, dims, b, dims);
  REQUIRE(hit.has_value());
  CHECK(*hit == 13);
}

TEST_CASE("earliest_collision_step immediate and absent cases")
{
  const BoxSize dims{4.0, 2.0};
  std::vector<Pose2> a{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  std::vector<Pose2> b{{1.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
  const auto hit = earliest_collision_step(a, dims, b, dims);
  REQUIRE(hit.has_value());
  CHECK(*hit == 0);

  std::vector<Pose2> far{{100.0, 50.0, 0.0}, {101.0, 50.0, 0.0}};
  CHECK_FALSE(earliest_collision_step(a, dims, far, dims).has_value());

  std::vector<Pose2> shorter{{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(
    (void)earliest_collision_step(a, dims, shorter, dims), const Error &);
  try {
    (void)earliest_collision_step(a, dims, shorter, dims);
  } catch (const Error & e) {
    CHECK(e.code() == ErrorCode::argument);
  }
}

TEST_CASE("polyline construction rejects degenerate input")
{
  CHECK_THROWS_AS(Polyline({{0.0, 0.0}}), const Error &);
  CHECK_THROWS_AS(Polyline({{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}), const Error &);
}

TEST_CASE("project_to_polyline pinned cases")
{
  const Polyline line({{0.0, 0.0}, {10.0, 0.0}});

  const auto at_start = project_to_polyline({0.0, 0.0}, line);
  CHECK(at_start.arc_length == doctest::Approx(0.0));
  CHECK(at_start.lateral_offset == doctest::Approx(0.0));

  // One meter left of the midpoint: left of +x travel is +y.
  const auto left_mid = project_to_polyline({5.0, 1.0}, line);
  CHECK(left_mid.arc_length == doctest::Approx(5.0));
  CHECK(left_mid.lateral_offset == doctest::Approx(1.0));

  const auto right_mid = project_to_polyline({5.0, -2.0}, line);
  CHECK(right_mid.arc_length == doctest::Approx(5.0));
  CHECK(right_mid.lateral_offset == doctest::Approx(-2.0));

  // Beyond the last vertex: arc clamps, lateral is measured against the
  // extension of the final segment.
  const auto beyond = project_to_polyline({12.0, 0.7}, line);
  CHECK(beyond.arc_length == doctest::Approx(10.0));
  CHECK(beyond.lateral_offset == doctest::Approx(0.7));

  const auto before = project_to_polyline({-3.0, -0.4}, line);
  CHECK(before.arc_length == doctest::Approx(0.0));
  CHECK(before.lateral_offset == doctest::Approx(-0.4));
}

TEST_CASE("project_to_polyline agrees with a dense-sampling oracle")
{
  const Polyline line({{0.0, 0.0}, {8.0, 1.0}, {14.0, 6.0}, {14.0, 14.0}});
  std::mt19937_64 rng(23);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 p{unit() * 20.0 - 3.0, unit() * 20.0 - 3.0};
    const auto proj = project_to_polyline(p, line);

    // Brute force: nearest among densely sampled arc positions.
    double best_d = 1e18;
    double best_arc = 0.0;
    const int steps = 20000;
    for (int i = 0; i <= steps; ++i) {
      const double arc = line.length() * static_cast<double>(i) / steps;
      const double d = distance(p, line.point_at_arc(arc));
      if (d < best_d) {
        best_d = d;
        best_arc = arc;
      }
    }
    const bool interior = best_arc > 1e-6 && best_arc < line.length() - 1e-6;
    CHECK(proj.arc_length == doctest::Approx(best_arc).epsilon(1e-3));
    if (interior) {
      CHECK(std::abs(proj.lateral_offset) == doctest::Approx(best_d).epsilon(1e-3));
    }
  }
}

namespace
{

double binomial(int n, int k)
{
  double r = 1.0;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

// Bernstein-basis evaluation, independent of the de Casteljau recursion.
Vec2 bernstein_point(const std::vector<Vec2> & ctrl, double t)
{
  const int n = static_cast<int>(ctrl.size()) - 1;
  Vec2 acc{0.0, 0.0};
  for (int i = 0; i <= n; ++i) {
    const double w =
      binomial(n, i) * std::pow(t, i) * std::pow(1.0 - t, n - i);
    acc = acc + w * ctrl[static_cast<std::size_t>(i)];
  }
  return acc;
}

}  // namespace

TEST_CASE("bezier_fit pinned cases")
{
  const std::vector<Vec2> tri{{0.0, 0.0}, {5.0, 5.0}, {10.0, 0.0}};
  const Polyline fit = bezier_fit(tri, 3);
  REQUIRE(fit.points().size() == 3);
  CHECK(fit.points()[0].x == 0.0);
  CHECK(fit.points()[0].y == 0.0);
  CHECK(fit.points()[1].x == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(fit.points()[1].y == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.points()[2].x == 10.0);
  CHECK(fit.points()[2].y == 0.0);

  const std::vector<Vec2> straight{{0.0, 0.0}, {10.0, 0.0}};
  const Polyline seg = bezier_fit(straight, 11);
  REQUIRE(seg.points().size() == 11);
  for (std::size_t i = 0; i < 11; ++i) {
    CHECK(seg.points()[i].x == doctest::Approx(static_cast<double>(i)).epsilon(1e-12));
    CHECK(seg.points()[i].y == 0.0);
  }

  CHECK_THROWS_AS(bezier_fit(std::vector<Vec2>{{0.0, 0.0}}, 5), const Error &);
  CHECK_THROWS_AS(bezier_fit(straight, 1), const Error &);
}

TEST_CASE("bezier_point matches Bernstein evaluation and hits endpoints exactly")
{
  const std::vector<Vec2> ctrl{
    {0.1, 0.3}, {4.7, 8.1}, {9.2, -2.5}, {14.0, 3.3}, {18.5, 3.31}};
  for (int i = 0; i <= 50; ++i) {
    const double t = static_cast<double>(i) / 50.0;
    const Vec2 a = bezier_point(ctrl, t);
    const Vec2 b = bernstein_point(ctrl, t);
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-9));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-9));
  }
  const Vec2 start = bezier_point(ctrl, 0.0);
  const Vec2 end = bezier_point(ctrl, 1.0);
  CHECK(start.x == ctrl.front().x);
  CHECK(start.y == ctrl.front().y);
  CHECK(end.x == ctrl.back().x);
  CHECK(end.y == ctrl.back().y);
}

TEST_CASE("ray_segment_intersection basics")
{
  const auto hit = ray_segment_intersection({0.0, 0.0}, {1.0, 0.0}, {5.0, -1.0}, {5.0, 1.0});
  REQUIRE(hit.has_value());
  CHECK(*hit == doctest::Approx(5.0));
  CHECK_FALSE(
    ray_segment_intersection({0.0, 0.0}, {-1.0, 0.0}, {5.0, -1.0}, {5.0, 1.0}).has_value());
  CHECK_FALSE(
    ray_segment_intersection({0.0, 0.0}, {1.0, 0.0}, {5.0, 1.0}, {5.0, 3.0}).has_value());
}
