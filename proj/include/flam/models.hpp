#pragma once

#include <memory>

#include "flam/retarget.hpp"
#include "flam/skeleton.hpp"

namespace flam {

/// Canonical human skeleton: reduced joint set with spherical shoulders,
/// hips and spine, revolute elbows and knees. Proportions roughly match the
/// desk-scale biped so retargeted poses stay comparable.
inline std::shared_ptr<const SkeletonSpec> canonical_human_skeleton() {
  std::vector<JointSpec> joints;
  std::vector<double> masses;
  auto add = [&](const std::string& name, int parent, JointKind kind,
                 const Vec3& axis, const Vec3& offset, double mass) {
    JointSpec j;
    j.name = name;
    j.parent = parent;
    j.kind = kind;
    j.axis = axis;
    j.offset = offset;
    joints.push_back(j);
    masses.push_back(mass);
    return static_cast<int>(joints.size()) - 1;
  };
  const Vec3 y = Vec3::UnitY();
  const Vec3 zero = Vec3::Zero();
  const int pelvis = add("pelvis", kRootParent, JointKind::Fixed, zero,
                         {0.0, 0.0, 0.0}, 6.0);
  const int spine1 =
      add("spine1", pelvis, JointKind::Spherical, zero, {0.0, 0.0, 0.15}, 6.0);
  const int spine2 =
      add("spine2", spine1, JointKind::Spherical, zero, {0.0, 0.0, 0.18}, 6.0);
  const int neck =
      add("neck", spine2, JointKind::Spherical, zero, {0.0, 0.0, 0.14}, 1.5);
  add("head", neck, JointKind::Fixed, zero, {0.0, 0.0, 0.12}, 3.5);
  const int l_sho = add("l_shoulder", spine2, JointKind::Spherical, zero,
                        {0.0, 0.20, 0.10}, 1.8);
  const int l_elb = add("l_elbow", l_sho, JointKind::Revolute, y,
                        {0.0, 0.0, -0.28}, 1.2);
  add("l_wrist", l_elb, JointKind::Fixed, zero, {0.0, 0.0, -0.26}, 0.5);
  const int r_sho = add("r_shoulder", spine2, JointKind::Spherical, zero,
                        {0.0, -0.20, 0.10}, 1.8);
  const int r_elb = add("r_elbow", r_sho, JointKind::Revolute, y,
                        {0.0, 0.0, -0.28}, 1.2);
  add("r_wrist", r_elb, JointKind::Fixed, zero, {0.0, 0.0, -0.26}, 0.5);
  const int l_hip = add("l_hip", pelvis, JointKind::Spherical, zero,
                        {0.0, 0.09, -0.02}, 3.0);
  const int l_knee = add("l_knee", l_hip, JointKind::Revolute, y,
                         {0.0, 0.0, -0.44}, 2.0);
  add("l_foot", l_knee, JointKind::Fixed, zero, {0.0, 0.0, -0.44}, 1.0);
  const int r_hip = add("r_hip", pelvis, JointKind::Spherical, zero,
                        {0.0, -0.09, -0.02}, 3.0);
  const int r_knee = add("r_knee", r_hip, JointKind::Revolute, y,
                         {0.0, 0.0, -0.44}, 2.0);
  add("r_foot", r_knee, JointKind::Fixed, zero, {0.0, 0.0, -0.44}, 1.0);

  std::set<int> feet;
  for (int i = 0; i < static_cast<int>(joints.size()); ++i)
    if (joints[i].name == "l_foot" || joints[i].name == "r_foot")
      feet.insert(i);
  return std::make_shared<SkeletonSpec>(std::move(joints), std::move(masses),
                                        std::move(feet));
}

/// Five-link planar biped: floating pelvis/torso, two legs with hip and knee
/// pitch joints, point feet.
inline std::shared_ptr<const SkeletonSpec> planar_biped_skeleton() {
  std::vector<JointSpec> joints;
  std::vector<double> masses;
  auto add = [&](const std::string& name, int parent, JointKind kind,
                 const Vec3& axis, const Vec3& offset, double mass) {
    JointSpec j;
    j.name = name;
    j.parent = parent;
    j.kind = kind;
    j.axis = axis;
    j.offset = offset;
    joints.push_back(j);
    masses.push_back(mass);
    return static_cast<int>(joints.size()) - 1;
  };
  const Vec3 y = Vec3::UnitY();
  const Vec3 zero = Vec3::Zero();
  const int pelvis = add("pelvis", kRootParent, JointKind::Fixed, zero,
                         {0.0, 0.0, 0.0}, 3.0);
  add("torso", pelvis, JointKind::Fixed, zero, {0.0, 0.0, 0.45}, 7.0);
  const int l_hip =
      add("l_hip", pelvis, JointKind::Revolute, y, {0.0, 0.08, 0.0}, 1.2);
  const int l_knee =
      add("l_knee", l_hip, JointKind::Revolute, y, {0.0, 0.0, -0.45}, 0.8);
  add("l_foot", l_knee, JointKind::Fixed, zero, {0.0, 0.0, -0.45}, 0.5);
  const int r_hip =
      add("r_hip", pelvis, JointKind::Revolute, y, {0.0, -0.08, 0.0}, 1.2);
  const int r_knee =
      add("r_knee", r_hip, JointKind::Revolute, y, {0.0, 0.0, -0.45}, 0.8);
  add("r_foot", r_knee, JointKind::Fixed, zero, {0.0, 0.0, -0.45}, 0.5);

  std::set<int> feet;
  for (int i = 0; i < static_cast<int>(joints.size()); ++i)
    if (joints[i].name == "l_foot" || joints[i].name == "r_foot")
      feet.insert(i);
  return std::make_shared<SkeletonSpec>(std::move(joints), std::move(masses),
                                        std::move(feet));
}

/// Three-link inverted pendulum on a fixed stand.
inline std::shared_ptr<const SkeletonSpec> triple_pendulum_skeleton() {
  std::vector<JointSpec> joints;
  std::vector<double> masses;
  auto add = [&](const std::string& name, int parent, JointKind kind,
                 const Vec3& axis, const Vec3& offset, double mass) {
    JointSpec j;
    j.name = name;
    j.parent = parent;
    j.kind = kind;
    j.axis = axis;
    j.offset = offset;
    joints.push_back(j);
    masses.push_back(mass);
    return static_cast<int>(joints.size()) - 1;
  };
  const Vec3 y = Vec3::UnitY();
  const Vec3 zero = Vec3::Zero();
  const int base =
      add("base", kRootParent, JointKind::Fixed, zero, {0.0, 0.0, 0.0}, 0.5);
  const int j1 = add("j1", base, JointKind::Revolute, y, {0.0, 0.0, 0.0}, 0.8);
  const int j2 = add("j2", j1, JointKind::Revolute, y, {0.0, 0.0, 0.5}, 0.6);
  const int j3 = add("j3", j2, JointKind::Revolute, y, {0.0, 0.0, 0.5}, 0.4);
  add("tip", j3, JointKind::Fixed, zero, {0.0, 0.0, 0.5}, 0.3);
  std::set<int> feet{base};
  return std::make_shared<SkeletonSpec>(std::move(joints), std::move(masses),
                                        std::move(feet));
}

/// Biped -> human mapping: hips and knees transfer, everything else stays at
/// the zero pose.
inline MappingTable planar_biped_human_mapping(
    std::shared_ptr<const SkeletonSpec> robot,
    std::shared_ptr<const SkeletonSpec> human) {
  MappingTable t;
  t.robot = std::move(robot);
  t.human = std::move(human);
  auto r = [&](const char* n) { return t.robot->joint_index(n); };
  auto h = [&](const char* n) { return t.human->joint_index(n); };
  t.entries = {
      OneToOne{r("l_hip"), h("l_hip")},   OneToOne{r("l_knee"), h("l_knee")},
      OneToOne{r("r_hip"), h("r_hip")},   OneToOne{r("r_knee"), h("r_knee")},
      HumanRedundant{h("spine1")},        HumanRedundant{h("spine2")},
      HumanRedundant{h("neck")},          HumanRedundant{h("l_shoulder")},
      HumanRedundant{h("l_elbow")},       HumanRedundant{h("r_shoulder")},
      HumanRedundant{h("r_elbow")},
  };
  return t;
}

/// Pendulum -> human mapping: the chain drives one leg, as a one-legged
/// balance analog.
inline MappingTable pendulum_human_mapping(
    std::shared_ptr<const SkeletonSpec> robot,
    std::shared_ptr<const SkeletonSpec> human) {
  MappingTable t;
  t.robot = std::move(robot);
  t.human = std::move(human);
  auto r = [&](const char* n) { return t.robot->joint_index(n); };
  auto h = [&](const char* n) { return t.human->joint_index(n); };
  t.entries = {
      OneToOne{r("j1"), h("l_hip")},    OneToOne{r("j2"), h("l_knee")},
      OneToOne{r("j3"), h("spine1")},   HumanRedundant{h("spine2")},
      HumanRedundant{h("neck")},        HumanRedundant{h("l_shoulder")},
      HumanRedundant{h("l_elbow")},     HumanRedundant{h("r_shoulder")},
      HumanRedundant{h("r_elbow")},     HumanRedundant{h("r_hip")},
      HumanRedundant{h("r_knee")},
  };
  return t;
}

}  // namespace flam
