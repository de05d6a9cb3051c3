#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "instasim/geometry.hpp"

using namespace instasim::geometry;

namespace {
constexpr double kPi = std::numbers::pi;

AnchorPose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-200.0, 200.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  return {{pos(rng), pos(rng)}, normalize_angle(ang(rng))};
}
}  // namespace

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
  CHECK(normalize_angle(0.0) == 0.0);
  CHECK(normalize_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(2 * kPi + 0.5) == doctest::Approx(0.5));
  CHECK_THROWS_AS(normalize_angle(NAN), std::domain_error);
  CHECK_THROWS_AS(normalize_angle(INFINITY), std::domain_error);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> any(-100.0, 100.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = any(rng);
    const double y = normalize_angle(x);
    CHECK(y > -kPi);
    CHECK(y <= kPi);
    CHECK(std::remainder(x - y, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("relative_pose examples") {
  const RelPose same = relative_pose({{3, 4}, 0.7}, {{3, 4}, 0.7});
  CHECK(same.dheading() == doctest::Approx(0.0));
  CHECK(same.azimuth() == 0.0);
  CHECK(same.distance == 0.0);

  const RelPose ahead = relative_pose({{0, 0}, 0.0}, {{1, 0}, 0.0});
  CHECK(ahead.dheading() == doctest::Approx(0.0));
  CHECK(ahead.azimuth() == doctest::Approx(0.0));
  CHECK(ahead.distance == doctest::Approx(1.0));

  // (0,1) seen from a frame rotated by pi/2 lies on its x-axis.
  const RelPose rotated = relative_pose({{0, 0}, kPi / 2}, {{0, 1}, kPi});
  CHECK(rotated.dheading() == doctest::Approx(kPi / 2));
  CHECK(rotated.azimuth() == doctest::Approx(0.0).scale(1.0));
  CHECK(rotated.distance == doctest::Approx(1.0));

  // Target to the left.
  const RelPose left = relative_pose({{0, 0}, 0.0}, {{0, 2}, 0.0});
  CHECK(left.azimuth() == doctest::Approx(kPi / 2));
}

TEST_CASE("relative_pose properties") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 500; ++k) {
    const AnchorPose a = random_pose(rng);
    const AnchorPose b = random_pose(rng);
    const RelPose ab = relative_pose(a, b);
    const RelPose ba = relative_pose(b, a);
    CHECK(ab.distance == ba.distance);
    CHECK(ab.dheading_cos * ab.dheading_cos + ab.dheading_sin * ab.dheading_sin == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ab.azimuth_cos * ab.azimuth_cos + ab.azimuth_sin * ab.azimuth_sin == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(std::remainder(ab.dheading() + ba.dheading(), 2 * kPi)) < 1e-9);

    const RelPose self = relative_pose(a, a);
    CHECK(self.distance == 0.0);
    CHECK(self.azimuth_cos == 1.0);
    CHECK(self.azimuth_sin == 0.0);

    const AnchorPose t = random_pose(rng);
    const RelPose moved = relative_pose(apply_rigid_transform(a, t), apply_rigid_transform(b, t));
    CHECK(std::abs(moved.dheading_cos - ab.dheading_cos) < 1e-9);
    CHECK(std::abs(moved.dheading_sin - ab.dheading_sin) < 1e-9);
    CHECK(std::abs(moved.azimuth_cos - ab.azimuth_cos) < 1e-9);
    CHECK(std::abs(moved.azimuth_sin - ab.azimuth_sin) < 1e-9);
    CHECK(std::abs(moved.distance - ab.distance) < 1e-9);
  }
}

TEST_CASE("apply_rigid_transform") {
  const AnchorPose p{{2.0, -1.0}, 0.3};
  const AnchorPose id{{0, 0}, 0};
  CHECK(apply_rigid_transform(p, id) == p);

  const AnchorPose moved = apply_rigid_transform({{0, 0}, 0}, {{1, 0}, 0});
  CHECK(moved.position.x == doctest::Approx(1.0));
  CHECK(moved.position.y == doctest::Approx(0.0));

  const AnchorPose half{{0, 0}, kPi};
  const AnchorPose twice = apply_rigid_transform(apply_rigid_transform(p, half), half);
  CHECK(twice.position.x == doctest::Approx(p.position.x));
  CHECK(twice.position.y == doctest::Approx(p.position.y));
  CHECK(twice.heading == doctest::Approx(p.heading));

  const Vec2 g{5.0, 7.0};
  const AnchorPose frame{{1.0, 2.0}, 1.1};
  const Vec2 back = to_global(to_local(g, frame), frame);
  CHECK(back.x == doctest::Approx(g.x));
  CHECK(back.y == doctest::Approx(g.y));
}

TEST_CASE("oriented box overlap") {
  CHECK_FALSE(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{100, 0}, 0}, 4, 2));
  CHECK(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{0, 0}, 0}, 4, 2));
  CHECK_FALSE(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{4.01, 0}, 0}, 4, 2));
  CHECK(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{3.99, 0}, 0}, 4, 2));
  // Exactly touching is not an overlap.
  CHECK_FALSE(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{4.0, 0}, 0}, 4, 2));
  // Rotated box crossing the corner region.
  CHECK(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{2.5, 1.5}, kPi / 4}, 4, 2));
  CHECK_FALSE(oriented_boxes_overlap({{0, 0}, 0}, 4, 2, {{4.0, 3.0}, kPi / 4}, 4, 2));
}
