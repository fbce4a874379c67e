#pragma once

#include <cmath>
#include <vector>

#include "flam/retarget.hpp"
#include "flam/stabilizer.hpp"

namespace flam {

/// Parameters of the stabilizing reward. The similarity threshold is tied to
/// the expected similar joint count: t_s = n_bar * r_j.
struct RewardParams {
  double r_j = 0.1;       // per-joint reward
  double t_j = 0.1;       // squared joint distance threshold
  double t_s = 1.5;       // similarity threshold
  int n_bar = 15;         // expected similar joint count
  double lambda = 1.0;    // stabilizing reward scale
  double q = 750.0;       // expected return of the task
  double l_e = 1000.0;    // max episode length
  std::vector<int> participating_joints;  // empty = all joints of the pose

  void validate(int joint_count = 0) const {
    if (!(r_j > 0.0)) throw StructuralError("reward: r_j must be > 0");
    if (!(t_j > 0.0)) throw StructuralError("reward: t_j must be > 0");
    if (std::abs(t_s - n_bar * r_j) >= 1e-12)
      throw StructuralError("reward: t_s must equal n_bar * r_j");
    if (n_bar <= 0) throw StructuralError("reward: n_bar must be > 0");
    if (joint_count > 0 && n_bar > joint_count)
      throw StructuralError("reward: n_bar exceeds joint count");
    if (lambda < 0.0) throw StructuralError("reward: lambda must be >= 0");
    if (!(q > 0.0)) throw StructuralError("reward: q must be > 0");
    if (!(l_e > 0.0)) throw StructuralError("reward: l_e must be > 0");
  }
};

/// Squared norm of the pose difference embedded as a 6-vector: position
/// delta in meters stacked with the rotation difference as a rotation
/// vector in radians.
inline double joint_distance(const JointPose& a, const JointPose& b) {
  if (!finite(a.position) || !finite(b.position) || !finite(a.orientation) ||
      !finite(b.orientation))
    throw InputError("joint_distance: non-finite input");
  const Vec3 dp = a.position - b.position;
  const Vec3 dr = rotation_difference(a.orientation, b.orientation);
  return dp.squaredNorm() + dr.squaredNorm();
}

/// Per-joint reward: r_j when the squared distance is within t_j (inclusive).
inline double joint_similarity(const JointPose& a, const JointPose& b,
                               const RewardParams& params) {
  return joint_distance(a, b) <= params.t_j ? params.r_j : 0.0;
}

/// Sum of per-joint rewards over the participating joints.
inline double pose_similarity(const std::vector<JointPose>& s_h,
                              const std::vector<JointPose>& s_hat,
                              const RewardParams& params) {
  if (s_h.size() != s_hat.size())
    throw StructuralError("pose_similarity: joint count mismatch");
  double total = 0.0;
  if (params.participating_joints.empty()) {
    for (size_t i = 0; i < s_h.size(); ++i)
      total += joint_similarity(s_h[i], s_hat[i], params);
  } else {
    for (int i : params.participating_joints) {
      if (i < 0 || i >= static_cast<int>(s_h.size()))
        throw StructuralError("pose_similarity: participating joint index out of range");
      total += joint_similarity(s_h[i], s_hat[i], params);
    }
  }
  return total;
}

/// Thresholded similarity: the full value when it reaches t_s (inclusive),
/// zero otherwise.
inline double stabilizing_reward(double similarity, const RewardParams& params) {
  return similarity >= params.t_s ? similarity : 0.0;
}

/// R = R_T + lambda * (q / l_e) * R_S.
inline double combine_rewards(double task_reward, double stab_reward,
                              const RewardParams& params) {
  return task_reward + params.lambda * (params.q / params.l_e) * stab_reward;
}

/// Full per-frame stabilizing-reward pipeline for one robot trajectory
/// segment: retarget, reconstruct, compare world-frame joint poses.
inline std::vector<double> segment_stabilizing_rewards(
    const TrajectorySegment& robot_segment, const MappingTable& mapping,
    const MotionReconstructor& reconstructor, const RewardParams& params) {
  const TrajectorySegment aligned = map_segment(mapping, robot_segment);
  const TrajectorySegment stable = reconstructor.reconstruct(aligned);
  const SkeletonSpec& human = *mapping.human;

  std::vector<double> rewards;
  rewards.reserve(aligned.poses.size());
  for (int f = 0; f < aligned.length(); ++f) {
    const auto fk_aligned = forward_kinematics(human, aligned.poses[f]);
    const auto fk_stable = forward_kinematics(human, stable.poses[f]);
    const double similarity = pose_similarity(fk_aligned, fk_stable, params);
    rewards.push_back(stabilizing_reward(similarity, params));
  }
  return rewards;
}

}  // namespace flam
