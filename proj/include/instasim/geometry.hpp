#ifndef INSTASIM_GEOMETRY_HPP_
#define INSTASIM_GEOMETRY_HPP_

#include <array>
#include <cmath>

namespace instasim::geometry {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

// Origin and heading of a local coordinate frame expressed in an arbitrary
// global frame. Heading is kept in (-pi, pi].
struct AnchorPose {
  Vec2 position;
  double heading = 0.0;

  bool operator==(const AnchorPose&) const = default;
};

// Pose of instance j seen from the frame of instance i. Both angles are
// stored as unit-circle embeddings.
struct RelPose {
  double dheading_cos = 1.0;
  double dheading_sin = 0.0;
  double azimuth_cos = 1.0;
  double azimuth_sin = 0.0;
  double distance = 0.0;

  double dheading() const { return std::atan2(dheading_sin, dheading_cos); }
  double azimuth() const { return std::atan2(azimuth_sin, azimuth_cos); }

  // Five-value feature vector; distance divided by `distance_scale`.
  std::array<double, 5> embedding(double distance_scale) const {
    return {dheading_cos, dheading_sin, azimuth_cos, azimuth_sin, distance / distance_scale};
  }
};

// Wraps into (-pi, pi]. Throws std::domain_error on non-finite input.
double normalize_angle(double x);

// Throws std::domain_error if the pose is not finite.
void validate(const AnchorPose& pose);

RelPose relative_pose(const AnchorPose& from, const AnchorPose& to);

// SE(2) composition: expresses `pose` (given in the frame `t`) in the frame
// that `t` is expressed in.
AnchorPose apply_rigid_transform(const AnchorPose& pose, const AnchorPose& t);

Vec2 rotate(const Vec2& v, double angle);

// Separating-axis test for two rectangles centered on their poses; touching
// edges do not count as overlap.
bool oriented_boxes_overlap(const AnchorPose& a, double a_length, double a_width,
                            const AnchorPose& b, double b_length, double b_width);
Vec2 to_local(const Vec2& global, const AnchorPose& frame);
Vec2 to_global(const Vec2& local, const AnchorPose& frame);

}  // namespace instasim::geometry

#endif  // INSTASIM_GEOMETRY_HPP_
