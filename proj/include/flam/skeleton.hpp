#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "flam/errors.hpp"
#include "flam/geometry.hpp"

namespace flam {

constexpr int kRootParent = -1;

enum class JointKind { Revolute, Spherical, Fixed };

/// One joint of a kinematic tree. Joints are stored in topological order, so
/// parent < own index always holds (the root joint has parent kRootParent).
struct JointSpec {
  std::string name;
  int parent = kRootParent;
  JointKind kind = JointKind::Fixed;
  Vec3 axis = Vec3::UnitZ();    // revolute only, unit norm
  Vec3 offset = Vec3::Zero();   // translation from parent joint, zero pose
};

/// Kinematic tree plus per-joint point masses and the set of ground-contact
/// joints.
class SkeletonSpec {
 public:
  SkeletonSpec() = default;

  SkeletonSpec(std::vector<JointSpec> joints, std::vector<double> masses,
               std::set<int> foot_joints)
      : joints_(std::move(joints)),
        masses_(std::move(masses)),
        foot_joints_(std::move(foot_joints)) {
    validate();
    build_rotation_index();
  }

  const std::vector<JointSpec>& joints() const { return joints_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::set<int>& foot_joints() const { return foot_joints_; }
  int joint_count() const { return static_cast<int>(joints_.size()); }

  /// Index into Pose::joint_rotations for a non-fixed joint, -1 for fixed.
  int rotation_index(int joint) const { return rotation_index_[joint]; }
  int rotation_count() const { return rotation_count_; }

  int joint_index(const std::string& name) const {
    auto it = name_to_index_.find(name);
    if (it == name_to_index_.end())
      throw StructuralError("skeleton: unknown joint name '" + name + "'");
    return it->second;
  }
  bool has_joint(const std::string& name) const {
    return name_to_index_.count(name) > 0;
  }

 private:
  void validate() {
    if (joints_.empty()) throw StructuralError("skeleton: no joints");
    if (masses_.size() != joints_.size())
      throw StructuralError("skeleton: mass count != joint count");
    if (foot_joints_.empty())
      throw StructuralError("skeleton: foot joint set is empty");
    int roots = 0;
    for (int i = 0; i < joint_count(); ++i) {
      const JointSpec& j = joints_[i];
      if (j.parent == kRootParent) {
        ++roots;
        if (i != 0) throw StructuralError("skeleton: root must be joint 0");
      } else if (j.parent < 0 || j.parent >= i) {
        throw StructuralError("skeleton: joint '" + j.name +
                              "' parent index breaks topological order");
      }
      if (j.kind == JointKind::Revolute &&
          std::abs(j.axis.norm() - 1.0) >= 1e-9)
        throw StructuralError("skeleton: joint '" + j.name +
                              "' revolute axis is not unit norm");
      if (!finite(j.offset))
        throw StructuralError("skeleton: joint '" + j.name +
                              "' offset not finite");
      if (!name_to_index_.emplace(j.name, i).second)
        throw StructuralError("skeleton: duplicate joint name '" + j.name +
                              "'");
      if (!(masses_[i] > 0.0))
        throw StructuralError("skeleton: joint '" + j.name +
                              "' mass must be positive");
    }
    if (roots != 1)
      throw StructuralError("skeleton: expected exactly one root joint");
    for (int f : foot_joints_)
      if (f < 0 || f >= joint_count())
        throw StructuralError("skeleton: foot joint index out of range");
  }

  void build_rotation_index() {
    rotation_index_.assign(joints_.size(), -1);
    for (int i = 0; i < joint_count(); ++i)
      if (joints_[i].kind != JointKind::Fixed)
        rotation_index_[i] = rotation_count_++;
  }

  std::vector<JointSpec> joints_;
  std::vector<double> masses_;
  std::set<int> foot_joints_;
  std::vector<int> rotation_index_;
  int rotation_count_ = 0;
  std::unordered_map<std::string, int> name_to_index_;
};

/// Rotation state of one non-fixed joint: a scalar angle for revolute joints,
/// a unit quaternion for spherical joints.
using JointRotation = std::variant<double, Quat>;

/// Root transform plus one rotation entry per non-fixed joint.
struct Pose {
  Vec3 root_translation = Vec3::Zero();
  Quat root_orientation = Quat::Identity();
  std::vector<JointRotation> joint_rotations;
};

/// World-frame position and orientation of one joint. The orientation is
/// sign-canonicalized (scalar part >= 0).
struct JointPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

/// Ordered pose sequence; the unit the stabilizer operates on.
struct TrajectorySegment {
  std::vector<Pose> poses;

  int length() const { return static_cast<int>(poses.size()); }
  bool empty() const { return poses.empty(); }
};

inline void check_pose(const SkeletonSpec& skeleton, const Pose& pose) {
  if (static_cast<int>(pose.joint_rotations.size()) !=
      skeleton.rotation_count())
    throw StructuralError("pose: rotation count mismatch with skeleton");
  if (!finite(pose.root_translation) || !finite(pose.root_orientation))
    throw InputError("pose: non-finite root transform");
  if (std::abs(pose.root_orientation.norm() - 1.0) >= 1e-9)
    throw InputError("pose: root orientation not unit norm");
  for (int i = 0; i < skeleton.joint_count(); ++i) {
    const int r = skeleton.rotation_index(i);
    if (r < 0) continue;
    const JointRotation& jr = pose.joint_rotations[r];
    if (skeleton.joints()[i].kind == JointKind::Revolute) {
      if (!std::holds_alternative<double>(jr))
        throw StructuralError("pose: revolute joint '" +
                              skeleton.joints()[i].name +
                              "' expects a scalar angle");
      if (!std::isfinite(std::get<double>(jr)))
        throw InputError("pose: non-finite angle at joint '" +
                         skeleton.joints()[i].name + "'");
    } else {
      if (!std::holds_alternative<Quat>(jr))
        throw StructuralError("pose: spherical joint '" +
                              skeleton.joints()[i].name +
                              "' expects a quaternion");
      const Quat& q = std::get<Quat>(jr);
      if (!finite(q)) throw InputError("pose: non-finite quaternion");
      if (std::abs(q.norm() - 1.0) >= 1e-9)
        throw InputError("pose: quaternion not unit norm at joint '" +
                         skeleton.joints()[i].name + "'");
    }
  }
}

/// All rotations identity, root at the origin.
inline Pose zero_pose(const SkeletonSpec& skeleton) {
  Pose pose;
  pose.joint_rotations.reserve(skeleton.rotation_count());
  for (const JointSpec& j : skeleton.joints()) {
    if (j.kind == JointKind::Revolute)
      pose.joint_rotations.emplace_back(0.0);
    else if (j.kind == JointKind::Spherical)
      pose.joint_rotations.emplace_back(Quat::Identity());
  }
  return pose;
}

inline Quat local_rotation(const SkeletonSpec& skeleton, const Pose& pose,
                           int joint) {
  const JointSpec& spec = skeleton.joints()[joint];
  const int r = skeleton.rotation_index(joint);
  switch (spec.kind) {
    case JointKind::Fixed:
      return Quat::Identity();
    case JointKind::Revolute:
      return quat_from_axis_angle(spec.axis,
                                  std::get<double>(pose.joint_rotations[r]));
    case JointKind::Spherical:
      return std::get<Quat>(pose.joint_rotations[r]);
  }
  return Quat::Identity();
}

/// World pose of every joint. Single forward pass over the topological order:
/// world_i = world_parent * translate(offset_i) * rotate(local_i).
inline std::vector<JointPose> forward_kinematics(const SkeletonSpec& skeleton,
                                                 const Pose& pose) {
  check_pose(skeleton, pose);
  std::vector<JointPose> out(skeleton.joint_count());
  for (int i = 0; i < skeleton.joint_count(); ++i) {
    const JointSpec& spec = skeleton.joints()[i];
    Vec3 parent_pos;
    Quat parent_rot;
    if (spec.parent == kRootParent) {
      parent_pos = pose.root_translation;
      parent_rot = pose.root_orientation;
    } else {
      parent_pos = out[spec.parent].position;
      parent_rot = out[spec.parent].orientation;
    }
    out[i].position = parent_pos + parent_rot * spec.offset;
    out[i].orientation =
        canonical(qmul(parent_rot, local_rotation(skeleton, pose, i)));
  }
  return out;
}

/// Mass-weighted mean of joint positions.
inline Vec3 center_of_mass(const SkeletonSpec& skeleton,
                           const std::vector<JointPose>& joint_poses) {
  if (skeleton.joint_count() == 0)
    throw StructuralError("center_of_mass: empty skeleton");
  if (static_cast<int>(joint_poses.size()) != skeleton.joint_count())
    throw StructuralError("center_of_mass: pose count mismatch");
  Vec3 weighted = Vec3::Zero();
  double total = 0.0;
  for (int i = 0; i < skeleton.joint_count(); ++i) {
    weighted += skeleton.masses()[i] * joint_poses[i].position;
    total += skeleton.masses()[i];
  }
  return weighted / total;
}

// ---------------------------------------------------------------------------
// Skeleton definition files. One joint per line, topological order:
//   joint <name> <parent|ROOT> revolute <ax> <ay> <az> offset <x> <y> <z> mass <m>
//   joint <name> <parent|ROOT> spherical offset <x> <y> <z> mass <m>
//   joint <name> <parent|ROOT> fixed offset <x> <y> <z> mass <m>
//   feet <name> [<name> ...]
// '#' starts a comment.
// ---------------------------------------------------------------------------

inline SkeletonSpec parse_skeleton(std::istream& in,
                                   const std::string& source = "<stream>") {
  std::vector<JointSpec> joints;
  std::vector<double> masses;
  std::vector<std::string> foot_names;
  std::unordered_map<std::string, int> index;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (tag == "joint") {
      JointSpec j;
      std::string parent, kind;
      if (!(ls >> j.name >> parent >> kind))
        throw StructuralError(where + ": malformed joint line");
      if (parent == "ROOT") {
        j.parent = kRootParent;
      } else {
        auto it = index.find(parent);
        if (it == index.end())
          throw StructuralError(where + ": unknown parent '" + parent + "'");
        j.parent = it->second;
      }
      if (kind == "revolute") {
        j.kind = JointKind::Revolute;
        if (!(ls >> j.axis[0] >> j.axis[1] >> j.axis[2]))
          throw StructuralError(where + ": revolute joint needs an axis");
      } else if (kind == "spherical") {
        j.kind = JointKind::Spherical;
      } else if (kind == "fixed") {
        j.kind = JointKind::Fixed;
      } else {
        throw StructuralError(where + ": unknown joint kind '" + kind + "'");
      }
      std::string kw;
      double mass = 0.0;
      if (!(ls >> kw) || kw != "offset" ||
          !(ls >> j.offset[0] >> j.offset[1] >> j.offset[2]))
        throw StructuralError(where + ": expected 'offset <x> <y> <z>'");
      if (!(ls >> kw) || kw != "mass" || !(ls >> mass))
        throw StructuralError(where + ": expected 'mass <m>'");
      index.emplace(j.name, static_cast<int>(joints.size()));
      joints.push_back(j);
      masses.push_back(mass);
    } else if (tag == "feet") {
      std::string name;
      while (ls >> name) foot_names.push_back(name);
    } else {
      throw StructuralError(where + ": unknown directive '" + tag + "'");
    }
  }

  std::set<int> feet;
  for (const std::string& name : foot_names) {
    auto it = index.find(name);
    if (it == index.end())
      throw StructuralError(source + ": feet list names unknown joint '" +
                            name + "'");
    feet.insert(it->second);
  }
  return SkeletonSpec(std::move(joints), std::move(masses), std::move(feet));
}

inline SkeletonSpec load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open skeleton file: " + path);
  return parse_skeleton(in, path);
}

}  // namespace flam
