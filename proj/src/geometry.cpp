#include "instasim/geometry.hpp"

#include <numbers>
#include <stdexcept>

namespace instasim::geometry {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCoincidentDistance = 1e-9;
}  // namespace

double normalize_angle(double x) {
  if (!std::isfinite(x)) throw std::domain_error("normalize_angle: non-finite input");
  double r = std::remainder(x, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

void validate(const AnchorPose& pose) {
  if (!std::isfinite(pose.position.x) || !std::isfinite(pose.position.y) ||
      !std::isfinite(pose.heading)) {
    throw std::domain_error("anchor pose is not finite");
  }
}

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 to_local(const Vec2& global, const AnchorPose& frame) {
  return rotate(global - frame.position, -frame.heading);
}

Vec2 to_global(const Vec2& local, const AnchorPose& frame) {
  return rotate(local, frame.heading) + frame.position;
}

bool oriented_boxes_overlap(const AnchorPose& a, double a_length, double a_width,
                            const AnchorPose& b, double b_length, double b_width) {
  const Vec2 ax{std::cos(a.heading), std::sin(a.heading)};
  const Vec2 ay{-ax.y, ax.x};
  const Vec2 bx{std::cos(b.heading), std::sin(b.heading)};
  const Vec2 by{-bx.y, bx.x};
  const Vec2 d = b.position - a.position;
  const double ahl = 0.5 * a_length, ahw = 0.5 * a_width;
  const double bhl = 0.5 * b_length, bhw = 0.5 * b_width;
  for (const Vec2& axis : {ax, ay, bx, by}) {
    const double ra = ahl * std::abs(ax.dot(axis)) + ahw * std::abs(ay.dot(axis));
    const double rb = bhl * std::abs(bx.dot(axis)) + bhw * std::abs(by.dot(axis));
    if (std::abs(d.dot(axis)) >= ra + rb) return false;
  }
  return true;
}

RelPose relative_pose(const AnchorPose& from, const AnchorPose& to) {
  validate(from);
  validate(to);
  RelPose r;
  const double dheading = normalize_angle(to.heading - from.heading);
  r.dheading_cos = std::cos(dheading);
  r.dheading_sin = std::sin(dheading);
  const Vec2 d = to.position - from.position;
  r.distance = d.norm();
  if (r.distance < kCoincidentDistance) {
    // Azimuth of a coincident anchor is undefined; pin it to 0.
    r.azimuth_cos = 1.0;
    r.azimuth_sin = 0.0;
  } else {
    const Vec2 local = rotate(d, -from.heading);
    const double psi = std::atan2(local.y, local.x);
    r.azimuth_cos = std::cos(psi);
    r.azimuth_sin = std::sin(psi);
  }
  return r;
}

AnchorPose apply_rigid_transform(const AnchorPose& pose, const AnchorPose& t) {
  validate(pose);
  validate(t);
  return {to_global(pose.position, t), normalize_angle(pose.heading + t.heading)};
}

}  // namespace instasim::geometry
