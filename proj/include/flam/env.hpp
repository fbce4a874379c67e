#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "flam/models.hpp"
#include "flam/nn.hpp"
#include "flam/skeleton.hpp"

namespace flam {

// ---------------------------------------------------------------------------
// Planar rigid-chain dynamics. Bodies are the skeleton's per-joint point
// masses; revolute joints must rotate about +y so the chain lives in the x-z
// plane. The mass matrix is assembled from point-mass Jacobians and the
// system is integrated with semi-implicit Euler at a fixed dt.
// ---------------------------------------------------------------------------

struct PlanarChainParams {
  bool floating_base = true;
  double dt = 0.01;
  double gravity = 9.81;
  double joint_damping = 0.4;  // N*m*s per revolute joint
  double torque_limit = 30.0;  // N*m, symmetric
  // penalty ground contact; rates sized for stability at dt = 0.01 with the
  // bundled foot masses (damping rate * dt well under 2)
  double contact_kp = 5000.0;  // N/m, normal spring
  double contact_kd = 60.0;    // N*s/m, normal damping
  double contact_kt = 3000.0;  // N/m, tangential anchor spring (stick)
  double contact_ct = 30.0;    // N*s/m, tangential damping
  double contact_mu = 1.2;     // Coulomb slip bound
  bool contacts_enabled = true;
  // half-length of the flat foot rigidly attached to the shank; point feet
  // when zero. Two contact points (heel, toe) per foot otherwise.
  double foot_half_length = 0.0;
  // soft joint stops: name -> [min, max] radians, spring below
  std::map<std::string, std::pair<double, double>> joint_stops;
  double joint_stop_stiffness = 300.0;  // N*m/rad
};

/// Stick-slip anchors of the foot contacts; owned by the caller so the chain
/// itself stays a pure function of (q, v, contacts).
struct ContactState {
  std::vector<bool> active;
  std::vector<double> anchor_x;

  void reset(size_t feet) {
    active.assign(feet, false);
    anchor_x.assign(feet, 0.0);
  }
};

class PlanarChain {
 public:
  PlanarChain(std::shared_ptr<const SkeletonSpec> skeleton,
              PlanarChainParams params)
      : skeleton_(std::move(skeleton)), params_(params) {
    const SkeletonSpec& s = *skeleton_;
    for (int j = 0; j < s.joint_count(); ++j) {
      const JointSpec& spec = s.joints()[j];
      if (spec.kind == JointKind::Spherical)
        throw StructuralError("planar chain: spherical joints unsupported");
      if (spec.kind == JointKind::Revolute) {
        if ((spec.axis - Vec3::UnitY()).norm() > 1e-9)
          throw StructuralError(
              "planar chain: revolute axes must be +y, joint '" + spec.name +
              "'");
        joint_of_dof_.push_back(j);
      }
    }
    base_dofs_ = params_.floating_base ? 3 : 0;
    // strict revolute ancestors of every joint, as dof indices
    ancestors_.resize(s.joint_count());
    for (int j = 0; j < s.joint_count(); ++j) {
      int p = s.joints()[j].parent;
      while (p != kRootParent) {
        if (s.joints()[p].kind == JointKind::Revolute)
          ancestors_[j].push_back(dof_of_joint(p));
        p = s.joints()[p].parent;
      }
    }
  }

  const SkeletonSpec& skeleton() const { return *skeleton_; }
  const std::shared_ptr<const SkeletonSpec>& skeleton_ptr() const {
    return skeleton_;
  }
  const PlanarChainParams& params() const { return params_; }
  int dof() const {
    return base_dofs_ + static_cast<int>(joint_of_dof_.size());
  }
  int joint_dof() const { return static_cast<int>(joint_of_dof_.size()); }
  bool floating_base() const { return params_.floating_base; }

  int dof_of_joint(int joint) const {
    for (size_t d = 0; d < joint_of_dof_.size(); ++d)
      if (joint_of_dof_[d] == joint)
        return base_dofs_ + static_cast<int>(d);
    throw StructuralError("planar chain: joint has no dof");
  }

  struct Kinematics {
    std::vector<Vec2> pos;    // x-z position per joint
    std::vector<double> lat;  // constant y per joint
    std::vector<double> angle;
    std::vector<double> omega;
    std::vector<Vec2> vel;
    std::vector<Vec2> bias;  // point acceleration at zero joint acceleration
    Vec2 base_pos;
  };

  Kinematics kinematics(const VectorXd& q, const VectorXd& v) const {
    const SkeletonSpec& s = *skeleton_;
    Kinematics k;
    const int n = s.joint_count();
    k.pos.resize(n);
    k.lat.resize(n);
    k.angle.resize(n);
    k.omega.resize(n);
    k.vel.resize(n);
    k.bias.resize(n);
    k.base_pos = params_.floating_base ? Vec2(q[0], q[1]) : Vec2(0.0, 0.0);
    const double base_angle = params_.floating_base ? q[2] : 0.0;
    const double base_rate = params_.floating_base ? v[2] : 0.0;
    const Vec2 base_vel =
        params_.floating_base ? Vec2(v[0], v[1]) : Vec2(0.0, 0.0);

    for (int j = 0; j < n; ++j) {
      const JointSpec& spec = s.joints()[j];
      Vec2 parent_pos, parent_vel, parent_bias;
      double parent_angle, parent_omega, parent_lat;
      if (spec.parent == kRootParent) {
        parent_pos = k.base_pos;
        parent_vel = base_vel;
        parent_bias = Vec2::Zero();
        parent_angle = base_angle;
        parent_omega = base_rate;
        parent_lat = 0.0;
      } else {
        parent_pos = k.pos[spec.parent];
        parent_vel = k.vel[spec.parent];
        parent_bias = k.bias[spec.parent];
        parent_angle = k.angle[spec.parent];
        parent_omega = k.omega[spec.parent];
        parent_lat = k.lat[spec.parent];
      }
      const Vec2 offset(spec.offset[0], spec.offset[2]);
      const Vec2 arm = rot_xz(parent_angle, offset);
      k.pos[j] = parent_pos + arm;
      k.lat[j] = parent_lat + spec.offset[1];
      k.vel[j] = parent_vel + parent_omega * perp_xz(arm);
      k.bias[j] = parent_bias - parent_omega * parent_omega * arm;
      if (spec.kind == JointKind::Revolute) {
        const int d = dof_of_joint(j);
        k.angle[j] = parent_angle + q[d];
        k.omega[j] = parent_omega + v[d];
      } else {
        k.angle[j] = parent_angle;
        k.omega[j] = parent_omega;
      }
    }
    return k;
  }

  /// Jacobian of joint position `j` with respect to the generalized
  /// velocities, 2 x dof.
  MatrixXd point_jacobian(const Kinematics& k, int j) const {
    return jacobian_at(k, j, k.pos[j]);
  }

  /// Jacobian of a world point rigidly attached to joint j's body.
  MatrixXd jacobian_at(const Kinematics& k, int j, const Vec2& point) const {
    MatrixXd jac = MatrixXd::Zero(2, dof());
    if (params_.floating_base) {
      jac(0, 0) = 1.0;
      jac(1, 1) = 1.0;
      const Vec2 r = perp_xz(point - k.base_pos);
      jac(0, 2) = r[0];
      jac(1, 2) = r[1];
    }
    for (int d : ancestors_[j]) {
      const int joint = joint_of_dof_[d - base_dofs_];
      const Vec2 r = perp_xz(point - k.pos[joint]);
      jac(0, d) = r[0];
      jac(1, d) = r[1];
    }
    return jac;
  }

  /// Heel/toe points per foot, rigid with the shank; one point when the foot
  /// has no extent.
  struct ContactPoint {
    int joint;          // foot joint the point is attached to
    double local_x;     // offset along the shank-local x axis
  };

  std::vector<ContactPoint> contact_points() const {
    std::vector<ContactPoint> pts;
    for (int f : skeleton_->foot_joints()) {
      if (params_.foot_half_length > 0.0) {
        pts.push_back({f, -params_.foot_half_length});
        pts.push_back({f, params_.foot_half_length});
      } else {
        pts.push_back({f, 0.0});
      }
    }
    return pts;
  }

  int contact_point_count() const {
    return static_cast<int>(skeleton_->foot_joints().size()) *
           (params_.foot_half_length > 0.0 ? 2 : 1);
  }

  struct ContactForce {
    int joint = -1;
    Vec2 at = Vec2::Zero();  // world position the force acts at
    Vec2 force = Vec2::Zero();
  };

  /// Penalty contact with stick-slip friction: a tangential spring anchors
  /// each contact point where it touched down and drags once the Coulomb
  /// bound binds.
  std::vector<ContactForce> contact_forces(const Kinematics& k,
                                           ContactState* contact) const {
    std::vector<ContactForce> out;
    if (!params_.contacts_enabled || !contact) return out;
    size_t slot = 0;
    for (const ContactPoint& cp : contact_points()) {
      const size_t i = slot++;
      const Vec2 arm = rot_xz(k.angle[cp.joint], Vec2(cp.local_x, 0.0));
      const Vec2 p = k.pos[cp.joint] + arm;
      const double z = p[1];
      if (z >= 0.0) {
        contact->active[i] = false;
        continue;
      }
      const Vec2 vel = k.vel[cp.joint] + k.omega[cp.joint] * perp_xz(arm);
      if (!contact->active[i]) {
        contact->active[i] = true;
        contact->anchor_x[i] = p[0];
      }
      double fn = params_.contact_kp * (-z) - params_.contact_kd * vel[1];
      if (fn < 0.0) fn = 0.0;
      double ft = -params_.contact_kt * (p[0] - contact->anchor_x[i]) -
                  params_.contact_ct * vel[0];
      const double cap = params_.contact_mu * fn;
      if (ft > cap || ft < -cap) {
        ft = std::clamp(ft, -cap, cap);
        // slide the anchor so the spring realizes exactly the bound force
        contact->anchor_x[i] =
            p[0] + (ft + params_.contact_ct * vel[0]) / params_.contact_kt;
      }
      out.push_back({cp.joint, p, Vec2(ft, fn)});
    }
    return out;
  }

  /// One semi-implicit Euler step under the given joint torques.
  void step(VectorXd& q, VectorXd& v, const VectorXd& torque,
            ContactState* contact = nullptr) const {
    const SkeletonSpec& s = *skeleton_;
    const Kinematics k = kinematics(q, v);
    const Vec2 g(0.0, -params_.gravity);

    MatrixXd mass = MatrixXd::Zero(dof(), dof());
    VectorXd rhs = VectorXd::Zero(dof());
    for (int j = 0; j < s.joint_count(); ++j) {
      const double m = s.masses()[j];
      const MatrixXd jac = point_jacobian(k, j);
      mass.noalias() += m * jac.transpose() * jac;
      rhs.noalias() += m * jac.transpose() * (g - k.bias[j]);
    }
    for (int d = 0; d < joint_dof(); ++d) {
      const int dof_index = base_dofs_ + d;
      const double t =
          std::clamp(torque[d], -params_.torque_limit, params_.torque_limit);
      rhs[dof_index] += t - params_.joint_damping * v[dof_index];
      // soft joint stops
      const auto stop = params_.joint_stops.find(
          s.joints()[joint_of_dof_[d]].name);
      if (stop != params_.joint_stops.end()) {
        const auto [lo, hi] = stop->second;
        if (q[dof_index] < lo)
          rhs[dof_index] += params_.joint_stop_stiffness * (lo - q[dof_index]);
        else if (q[dof_index] > hi)
          rhs[dof_index] += params_.joint_stop_stiffness * (hi - q[dof_index]);
      }
    }
    for (const ContactForce& c : contact_forces(k, contact)) {
      const MatrixXd jac = jacobian_at(k, c.joint, c.at);
      rhs.noalias() += jac.transpose() * c.force;
    }

    Eigen::LDLT<MatrixXd> solver(mass);
    if (solver.info() != Eigen::Success)
      throw TrainingFault("planar chain: singular mass matrix");
    const VectorXd acc = solver.solve(rhs);
    v += params_.dt * acc;
    q += params_.dt * v;
  }

  double mechanical_energy(const VectorXd& q, const VectorXd& v) const {
    const Kinematics k = kinematics(q, v);
    double e = 0.0;
    for (int j = 0; j < skeleton_->joint_count(); ++j) {
      const double m = skeleton_->masses()[j];
      e += 0.5 * m * k.vel[j].squaredNorm();
      e += m * params_.gravity * k.pos[j][1];
    }
    return e;
  }

  /// Pose on the skeleton matching the planar state.
  Pose to_pose(const VectorXd& q) const {
    Pose pose = zero_pose(*skeleton_);
    if (params_.floating_base) {
      pose.root_translation = Vec3(q[0], 0.0, q[1]);
      pose.root_orientation = canonical(quat_from_axis_angle(Vec3::UnitY(), q[2]));
    }
    for (int d = 0; d < joint_dof(); ++d) {
      const int joint = joint_of_dof_[d];
      pose.joint_rotations[skeleton_->rotation_index(joint)] =
          q[base_dofs_ + d];
    }
    return pose;
  }

 private:
  std::shared_ptr<const SkeletonSpec> skeleton_;
  PlanarChainParams params_;
  std::vector<int> joint_of_dof_;
  std::vector<std::vector<int>> ancestors_;
  int base_dofs_ = 0;
};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct TaskSpec {
  std::string name;
  VectorXd action_low;
  VectorXd action_high;
  double lambda_default = 1.0;
  double q_default = 750.0;
  /// Documented per-step maximum of the dense task reward; the per-episode
  /// maximum is max_step_reward * max_episode_steps.
  double max_step_reward = 1.0;
};

struct EnvState {
  VectorXd observation;
  Pose robot_pose;
  int time_step = 0;
};

inline Pose extract_robot_pose(const EnvState& state) {
  return state.robot_pose;
}

class PlanarEnv {
 public:
  static constexpr double kStanceSplay = 0.25;  // rad, fore/aft hip split

  explicit PlanarEnv(const std::string& task, int max_episode_steps = 1000)
      : task_(task), max_episode_steps_(max_episode_steps) {
    PlanarChainParams params;
    if (task == "planar_stand" || task == "planar_walk") {
      params.floating_base = true;
      params.joint_damping = 1.2;
      params.foot_half_length = 0.09;
      params.joint_stops["l_knee"] = {-0.05, 2.4};
      params.joint_stops["r_knee"] = {-0.05, 2.4};
      params.joint_stops["l_hip"] = {-1.7, 1.7};
      params.joint_stops["r_hip"] = {-1.7, 1.7};
      chain_ = std::make_unique<PlanarChain>(planar_biped_skeleton(), params);
    } else if (task == "pendulum_balance") {
      params.floating_base = false;
      params.contacts_enabled = false;
      params.torque_limit = 15.0;
      params.joint_damping = 0.25;
      chain_ =
          std::make_unique<PlanarChain>(triple_pendulum_skeleton(), params);
    } else {
      throw StructuralError("unknown task '" + task + "'");
    }
    spec_.name = task;
    const int adof = chain_->joint_dof();
    spec_.action_low = VectorXd::Constant(adof, -chain_->params().torque_limit);
    spec_.action_high = VectorXd::Constant(adof, chain_->params().torque_limit);
    spec_.max_step_reward = 1.0;
    spec_.lambda_default = 1.0;
    spec_.q_default = 750.0;  // all three ship as locomotion-style tasks
  }

  const TaskSpec& spec() const { return spec_; }
  const std::shared_ptr<const SkeletonSpec>& skeleton() const {
    return chain_->skeleton_ptr();
  }
  const PlanarChain& chain() const { return *chain_; }
  int max_episode_steps() const { return max_episode_steps_; }
  int observation_dim() const {
    return chain_->floating_base() ? 2 * chain_->dof() - 1
                                   : 2 * chain_->dof();
  }
  int action_dim() const { return chain_->joint_dof(); }

  EnvState reset(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    q_ = VectorXd::Zero(chain_->dof());
    v_ = VectorXd::Zero(chain_->dof());
    if (task_ == "planar_stand" || task_ == "planar_walk") {
      // scissor stance: feet split fore/aft so the sagittal support region
      // has width and static standing is possible on point feet
      q_[0] = 0.0;
      q_[1] = 0.85 + 0.01 * u(rng);
      q_[2] = 0.05 * u(rng);
      q_[3] = kStanceSplay + 0.08 * u(rng);   // l_hip
      q_[4] = 0.06 * u(rng);                  // l_knee
      q_[5] = -kStanceSplay + 0.08 * u(rng);  // r_hip
      q_[6] = 0.06 * u(rng);                  // r_knee
      for (int d = 0; d < chain_->dof(); ++d) v_[d] = 0.05 * u(rng);
    } else {
      for (int d = 0; d < chain_->dof(); ++d) q_[d] = 0.06 * u(rng);
      for (int d = 0; d < chain_->dof(); ++d) v_[d] = 0.03 * u(rng);
    }
    contact_.reset(chain_->contact_point_count());
    time_step_ = 0;
    done_ = false;
    return make_state();
  }

  struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
  };

  StepResult step(const VectorXd& action) {
    if (done_)
      throw ContractError("env: step() called on a finished episode");
    if (action.size() != action_dim())
      throw StructuralError("env: action dimension mismatch");
    VectorXd a = action;
    for (int i = 0; i < a.size(); ++i)
      a[i] = std::clamp(a[i], spec_.action_low[i], spec_.action_high[i]);
    chain_->step(q_, v_, a, &contact_);
    ++time_step_;

    StepResult result;
    result.reward = task_reward(a);
    done_ = terminated() || time_step_ >= max_episode_steps_;
    result.done = done_;
    result.state = make_state();
    return result;
  }

  bool done() const { return done_; }
  const VectorXd& q() const { return q_; }
  const VectorXd& v() const { return v_; }
  double mechanical_energy() const { return chain_->mechanical_energy(q_, v_); }
  Vec2 sim_joint_position(int joint) const {
    return chain_->kinematics(q_, v_).pos[joint];
  }

 private:
  EnvState make_state() const {
    EnvState s;
    s.observation = observation();
    s.robot_pose = chain_->to_pose(q_);
    s.time_step = time_step_;
    return s;
  }

  VectorXd observation() const {
    if (chain_->floating_base()) {
      // absolute x excluded; everything else plus all velocities
      VectorXd obs(2 * chain_->dof() - 1);
      int k = 0;
      for (int d = 1; d < chain_->dof(); ++d) obs[k++] = q_[d];
      for (int d = 0; d < chain_->dof(); ++d) obs[k++] = v_[d];
      return obs;
    }
    VectorXd obs(2 * chain_->dof());
    obs.head(chain_->dof()) = q_;
    obs.tail(chain_->dof()) = v_;
    return obs;
  }

  bool terminated() const {
    if (task_ == "planar_stand" || task_ == "planar_walk")
      return q_[1] < 0.6 || std::abs(q_[2]) > 1.0;
    return false;
  }

  double task_reward(const VectorXd& /*action*/) const {
    if (task_ == "planar_stand") {
      const double height = std::clamp((q_[1] - 0.6) / (0.87 - 0.6), 0.0, 1.0);
      const double upright = std::clamp(std::cos(q_[2]), 0.0, 1.0);
      return 0.6 * height + 0.4 * upright;
    }
    if (task_ == "planar_walk") {
      const double height = std::clamp((q_[1] - 0.6) / (0.87 - 0.6), 0.0, 1.0);
      const double upright = std::clamp(std::cos(q_[2]), 0.0, 1.0);
      const double speed = std::clamp(v_[0] / 0.8, 0.0, 1.0);
      return 0.35 * height + 0.15 * upright + 0.5 * speed;
    }
    // pendulum_balance: tip height fraction
    const Kin kin = chain_->kinematics(q_, v_);
    const double tip_z = kin.pos.back()[1];
    return std::clamp((tip_z + 1.5) / 3.0, 0.0, 1.0);
  }

  using Kin = PlanarChain::Kinematics;

  std::string task_;
  int max_episode_steps_;
  std::unique_ptr<PlanarChain> chain_;
  TaskSpec spec_;
  ContactState contact_;
  VectorXd q_, v_;
  int time_step_ = 0;
  bool done_ = true;
};

inline std::vector<std::string> task_names() {
  return {"planar_stand", "planar_walk", "pendulum_balance"};
}

}  // namespace flam
