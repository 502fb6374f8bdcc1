#include "rieman/graph.hpp"

#include <cmath>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace rieman {

Eigen::Quaterniond canonical_quaternion(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (double v : c) {
    if (v != 0.0) {
      if (v < 0.0) {
        q.coeffs() = -q.coeffs();
      }
      break;
    }
  }
  return q;
}

PoseRecord make_pose_record(Id id, const PoseSE3& pose) {
  return PoseRecord{id, canonical_quaternion(pose.rotation()),
                    pose.translation()};
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) {
    throw ValidationError(message);
  }
}

template <typename Record>
std::unordered_set<Id> unique_ids(const std::vector<Record>& records,
                                  const char* kind) {
  std::unordered_set<Id> ids;
  for (const Record& r : records) {
    require(ids.insert(r.id).second,
            std::string("duplicate ") + kind + " id " + std::to_string(r.id));
  }
  return ids;
}

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void validate_graph(const FactorGraph& graph) {
  require(graph.intrinsics.fx > 0.0 && graph.intrinsics.fy > 0.0,
          "camera focal lengths must be positive");
  require(std::isfinite(graph.intrinsics.cx) && std::isfinite(graph.intrinsics.cy),
          "camera principal point must be finite");
  require(graph.image_width > 0 && graph.image_height > 0,
          "image size must be positive");

  const auto pose_ids = unique_ids(graph.poses, "pose");
  const auto point_ids = unique_ids(graph.points, "point");
  const auto line_ids = unique_ids(graph.lines, "line");
  unique_ids(graph.groups, "group");
  unique_ids(graph.gt_poses, "ground-truth pose");
  unique_ids(graph.gt_points, "ground-truth point");
  unique_ids(graph.gt_lines, "ground-truth line");

  for (const PoseRecord& p : graph.poses) {
    require(finite(p.t) && p.q.coeffs().allFinite(),
            "pose " + std::to_string(p.id) + " has non-finite values");
    require(std::abs(p.q.norm() - 1.0) <= 1e-6,
            "pose " + std::to_string(p.id) + " quaternion is not unit");
  }
  for (const PointRecord& p : graph.points) {
    require(finite(p.p), "point " + std::to_string(p.id) + " has non-finite values");
  }
  auto check_line = [](const LineRecord& l, const char* kind) {
    require(finite(l.line.n) && finite(l.line.d),
            std::string(kind) + " " + std::to_string(l.id) + " has non-finite values");
    const double dn = l.line.d.norm();
    require(dn > 1e-12,
            std::string(kind) + " " + std::to_string(l.id) + " has zero direction");
    const double ortho =
        std::abs(l.line.n.dot(l.line.d)) / std::max(1.0, l.line.n.norm() * dn);
    require(ortho <= 1e-6, std::string(kind) + " " + std::to_string(l.id) +
                               " violates the Pluecker constraint");
  };
  for (const LineRecord& l : graph.lines) check_line(l, "line");
  for (const LineRecord& l : graph.gt_lines) check_line(l, "ground-truth line");
  for (const PoseRecord& p : graph.gt_poses) {
    require(finite(p.t) && p.q.coeffs().allFinite() &&
                std::abs(p.q.norm() - 1.0) <= 1e-6,
            "ground-truth pose " + std::to_string(p.id) + " is invalid");
  }
  for (const PointRecord& p : graph.gt_points) {
    require(finite(p.p),
            "ground-truth point " + std::to_string(p.id) + " has non-finite values");
  }

  std::unordered_map<Id, Id> line_to_group;
  for (const GroupRecord& g : graph.groups) {
    require(g.line_ids.size() >= 2, "group " + std::to_string(g.id) +
                                        " needs at least two member lines");
    std::unordered_set<Id> members;
    for (const Id lid : g.line_ids) {
      require(line_ids.count(lid) != 0, "group " + std::to_string(g.id) +
                                            " references unknown line " +
                                            std::to_string(lid));
      require(members.insert(lid).second, "group " + std::to_string(g.id) +
                                              " lists line " +
                                              std::to_string(lid) + " twice");
      require(line_to_group.emplace(lid, g.id).second,
              "line " + std::to_string(lid) + " belongs to more than one group");
    }
  }

  std::set<std::pair<Id, Id>> seen_point_edges;
  for (const PointObservation& o : graph.point_observations) {
    require(pose_ids.count(o.pose_id) != 0,
            "point observation references unknown pose " + std::to_string(o.pose_id));
    require(point_ids.count(o.point_id) != 0,
            "point observation references unknown point " + std::to_string(o.point_id));
    require(o.pixel.allFinite(), "point observation has non-finite pixel");
    require(seen_point_edges.emplace(o.pose_id, o.point_id).second,
            "duplicate point observation (" + std::to_string(o.pose_id) + ", " +
                std::to_string(o.point_id) + ")");
  }
  std::set<std::pair<Id, Id>> seen_line_edges;
  for (const LineObservation& o : graph.line_observations) {
    require(pose_ids.count(o.pose_id) != 0,
            "line observation references unknown pose " + std::to_string(o.pose_id));
    require(line_ids.count(o.line_id) != 0,
            "line observation references unknown line " + std::to_string(o.line_id));
    require(o.p_start.allFinite() && o.p_end.allFinite(),
            "line observation has non-finite pixels");
    require(seen_line_edges.emplace(o.pose_id, o.line_id).second,
            "duplicate line observation (" + std::to_string(o.pose_id) + ", " +
                std::to_string(o.line_id) + ")");
  }
}

}  // namespace rieman
