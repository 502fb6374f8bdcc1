#pragma once

#include "rieman/factors.hpp"

#include <Eigen/Geometry>

#include <vector>

namespace rieman {

// The quaternion is the stored truth (it is what the text format carries);
// the rotation matrix is derived on demand. This keeps write(read(text))
// byte-identical for canonical files.
struct PoseRecord {
  Id id = 0;
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 t = Vec3::Zero();

  PoseSE3 pose() const { return PoseSE3(q.toRotationMatrix(), t); }
};

// Unit quaternion with the sign fixed so its first nonzero component
// (w, x, y, z order) is positive.
Eigen::Quaterniond canonical_quaternion(const Mat3& R);

PoseRecord make_pose_record(Id id, const PoseSE3& pose);

struct PointRecord {
  Id id = 0;
  Vec3 p = Vec3::Zero();
};

struct LineRecord {
  Id id = 0;
  PluckerLine line{Vec3::Zero(), Vec3::Zero()};
};

struct GroupRecord {
  Id id = 0;
  std::vector<Id> line_ids;
};

// Bundle-adjustment problem data: camera, vertices (current estimates),
// observations, optional ground-truth mirrors of the vertices.
struct FactorGraph {
  CameraIntrinsics intrinsics;
  int image_width = 0;
  int image_height = 0;

  std::vector<PoseRecord> poses;
  std::vector<PointRecord> points;
  std::vector<LineRecord> lines;
  std::vector<GroupRecord> groups;

  std::vector<PointObservation> point_observations;
  std::vector<LineObservation> line_observations;

  std::vector<PoseRecord> gt_poses;
  std::vector<PointRecord> gt_points;
  std::vector<LineRecord> gt_lines;

  bool has_ground_truth() const {
    return !gt_poses.empty() || !gt_points.empty() || !gt_lines.empty();
  }
};

// Structural validation: positive camera parameters, finite values, unique
// ids per record kind, resolvable references, groups of at least two lines
// with no line in two groups, no duplicate observations of one landmark
// from one pose, Pluecker records with nonzero direction and n.d = 0
// (relative 1e-6). Throws ValidationError.
void validate_graph(const FactorGraph& graph);

}  // namespace rieman
