#ifndef INSTASIM_TESTS_SUPPORT_HPP_
#define INSTASIM_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "instasim/dynamics.hpp"
#include "instasim/nn/tensor.hpp"
#include "instasim/scene.hpp"

namespace instasim::testing {

// Applies the same rigid transform to every anchor and pose of a scenario.
// Local polyline vectors are untouched.
inline scene::Scenario transform_scenario(const scene::Scenario& s, const geometry::AnchorPose& t) {
  scene::Scenario out = s;
  for (scene::Polyline& p : out.polylines) p.anchor = geometry::apply_rigid_transform(p.anchor, t);
  for (scene::AgentSpec& a : out.agents) a.pose = geometry::apply_rigid_transform(a.pose, t);
  for (auto& steps : out.expert) {
    for (scene::ExpertStep& e : steps) e.pose = geometry::apply_rigid_transform(e.pose, t);
  }
  return out;
}

inline std::vector<dynamics::AgentState> transform_states(const std::vector<dynamics::AgentState>& states,
                                                          const geometry::AnchorPose& t) {
  std::vector<dynamics::AgentState> out = states;
  for (dynamics::AgentState& s : out) s.pose = geometry::apply_rigid_transform(s.pose, t);
  return out;
}

inline double max_abs_diff(const nn::Tensor& a, const nn::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return a.size() == b.size() ? m : INFINITY;
}

}  // namespace instasim::testing

#endif  // INSTASIM_TESTS_SUPPORT_HPP_
