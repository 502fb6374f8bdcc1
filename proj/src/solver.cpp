#include "rieman/solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace rieman {

std::string method_name(Method method) {
  switch (method) {
    case Method::Point:
      return "Point";
    case Method::PointOrthLine:
      return "Point_OrthLine";
    case Method::PointOrthLineConstr:
      return "Point_OrthLine_Constr";
    case Method::PointRiemanLine:
      return "Point_RiemanLine";
    case Method::PointStructRiemanLine:
      return "Point_StructRiemanLine";
  }
  throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  for (const Method m : all_methods()) {
    if (method_name(m) == name) {
      return m;
    }
  }
  throw ValidationError(
      "unknown method '" + name +
      "' (expected Point, Point_OrthLine, Point_OrthLine_Constr, "
      "Point_RiemanLine or Point_StructRiemanLine)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {
      Method::Point, Method::PointOrthLine, Method::PointOrthLineConstr,
      Method::PointRiemanLine, Method::PointStructRiemanLine};
  return methods;
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::RelativeDecrease:
      return "relative_decrease";
    case Termination::StepNorm:
      return "step_norm";
    case Termination::MaxIterations:
      return "max_iterations";
    case Termination::NoFactors:
      return "no_factors";
    case Termination::AllFixed:
      return "all_fixed";
  }
  return "unknown";
}

void Problem::rebuild_columns() {
  int col = 0;
  auto assign = [&col](std::vector<Block>& blocks) {
    for (Block& b : blocks) {
      b.col = b.fixed ? -1 : col;
      if (!b.fixed) {
        col += b.dim;
      }
    }
  };
  assign(pose_blocks);
  assign(point_blocks);
  assign(orth_blocks);
  assign(rieman_blocks);
  assign(group_blocks);
  num_cols = col;
}

namespace {

template <typename Record>
std::vector<const Record*> sorted_by_id(const std::vector<Record>& records) {
  std::vector<const Record*> out;
  out.reserve(records.size());
  for (const Record& r : records) {
    out.push_back(&r);
  }
  std::sort(out.begin(), out.end(),
            [](const Record* a, const Record* b) { return a->id < b->id; });
  return out;
}

// Shared direction and per-member (normal, scale) for a group whose stored
// members may have drifted apart: mean of the sign-aligned directions, then
// each moment projected onto the plane orthogonal to it.
ParallelGroup init_group_block(const std::vector<const LineRecord*>& members) {
  const Vec3 d0 = members.front()->line.d.normalized();
  Vec3 sum = Vec3::Zero();
  std::vector<double> signs;
  signs.reserve(members.size());
  for (const LineRecord* m : members) {
    const Vec3 di = m->line.d.normalized();
    const double s = di.dot(d0) < 0.0 ? -1.0 : 1.0;
    signs.push_back(s);
    sum += s * di;
  }
  if (sum.norm() < 1e-9) {
    throw ValidationError("group member directions cancel; cannot initialize");
  }
  const UnitVector3 u2 = UnitVector3::normalized(sum);
  std::vector<ParallelGroup::Member> out;
  out.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const LineRecord* m = members[i];
    const Vec3 moment = signs[i] * m->line.n / m->line.d.norm();
    const Vec3 proj = moment - moment.dot(u2.vec()) * u2.vec();
    const double omega = proj.norm();
    if (omega <= 1e-9) {
      throw ThroughOriginError("group line " + std::to_string(m->id) +
                               " passes through the origin");
    }
    out.push_back({UnitVector3::normalized(proj), omega});
  }
  return ParallelGroup(u2, std::move(out));
}

// Current world-frame Pluecker coordinates of a line factor's target.
PluckerLine target_line(const ProblemState& st,
                        const Problem::LineFactor& f) {
  switch (f.target) {
    case Problem::LineTarget::Orth:
      return plucker_from_orthonormal(st.orth_lines[f.block]);
    case Problem::LineTarget::Rieman:
      return plucker_from_rieman(st.rieman_lines[f.block]);
    case Problem::LineTarget::GroupMember: {
      const ParallelGroup& g = st.groups[f.block];
      const ParallelGroup::Member& m = g.members()[f.member];
      return PluckerLine{m.scale * m.normal.vec(), g.direction().vec()};
    }
  }
  throw SolverError("target_line: unknown target");
}

bool eval_point_factor(const CameraIntrinsics& K, const PoseSE3& T_cw,
                       const Vec3& P_w, const Vec2& pixel, Vec2* r) {
  const Vec3 p = T_cw * P_w;
  if (!(p.z() > 0.0) || !p.allFinite()) {
    return false;
  }
  *r = Vec2(K.fx * p.x() / p.z() + K.cx - pixel.x(),
            K.fy * p.y() / p.z() + K.cy - pixel.y());
  return r->allFinite();
}

bool eval_line_factor(const Mat3& Kl, const PoseSE3& T_cw,
                      const LineObservation& obs, const PluckerLine& L_w,
                      Vec2* r) {
  const PluckerLine L_c = transform_plucker(T_cw, L_w);
  const Vec3 l = Kl * L_c.n;
  const double s2 = l.x() * l.x() + l.y() * l.y();
  if (!(s2 > 1e-24) || !l.allFinite()) {
    return false;
  }
  const double s = std::sqrt(s2);
  (*r)(0) = (obs.p_start.x() * l.x() + obs.p_start.y() * l.y() + l.z()) / s;
  (*r)(1) = (obs.p_end.x() * l.x() + obs.p_end.y() * l.y() + l.z()) / s;
  return r->allFinite();
}

// Oriented unit directions of the orthonormal blocks joined by a
// parallelism factor; false if any member degenerated.
bool parallel_directions(const ProblemState& st,
                         const Problem::ParallelFactor& f,
                         std::vector<UnitVector3>* dirs,
                         std::vector<double>* signs) {
  dirs->clear();
  if (signs != nullptr) {
    signs->clear();
  }
  for (const int b : f.blocks) {
    const OrthonormalLine& o = st.orth_lines[b];
    const double w2 = o.W(1, 0);
    if (w2 == 0.0 || !o.U.allFinite()) {
      return false;
    }
    const double s = w2 < 0.0 ? -1.0 : 1.0;
    dirs->push_back(UnitVector3::normalized(s * o.U.col(1)));
    if (signs != nullptr) {
      signs->push_back(s);
    }
  }
  return true;
}

}  // namespace

Problem assemble(const FactorGraph& graph, const SolveConfig& config) {
  validate_graph(graph);
  if (graph.poses.empty()) {
    throw ValidationError("graph has no poses");
  }

  Problem pb;
  pb.method = config.method;
  pb.intrinsics = graph.intrinsics;

  const auto poses = sorted_by_id(graph.poses);
  const auto points = sorted_by_id(graph.points);
  const auto lines = sorted_by_id(graph.lines);
  const auto groups = sorted_by_id(graph.groups);

  std::unordered_map<Id, std::int64_t> point_obs_count, line_obs_count;
  for (const PointObservation& o : graph.point_observations) {
    ++point_obs_count[o.point_id];
  }
  for (const LineObservation& o : graph.line_observations) {
    ++line_obs_count[o.line_id];
  }

  // Landmarks seen from fewer than 3 poses are dropped together with their
  // observations.
  std::unordered_set<Id> kept_points, kept_lines;
  for (const PointRecord* p : points) {
    if (point_obs_count[p->id] >= 3) {
      kept_points.insert(p->id);
    } else {
      ++pb.pruned_points;
    }
  }
  for (const LineRecord* l : lines) {
    if (line_obs_count[l->id] >= 3) {
      kept_lines.insert(l->id);
    } else {
      ++pb.pruned_lines;
    }
  }
  if ((!graph.points.empty() || !graph.lines.empty()) && kept_points.empty() &&
      kept_lines.empty()) {
    throw ValidationError("no landmark survives the 3-observation pruning");
  }

  // Pose blocks; the lowest id is the gauge.
  std::unordered_map<Id, int> pose_index;
  for (const PoseRecord* p : poses) {
    pose_index.emplace(p->id, static_cast<int>(pb.pose_ids.size()));
    pb.pose_ids.push_back(p->id);
    pb.initial.poses.push_back(p->pose());
    pb.pose_blocks.push_back({-1, 6, false});
  }
  pb.pose_blocks.front().fixed = true;

  std::unordered_map<Id, int> point_index;
  for (const PointRecord* p : points) {
    if (kept_points.count(p->id) == 0) continue;
    point_index.emplace(p->id, static_cast<int>(pb.point_ids.size()));
    pb.point_ids.push_back(p->id);
    pb.initial.points.push_back(p->p);
    pb.point_blocks.push_back({-1, 3, false});
  }

  // Surviving groups (>= 2 members after pruning); any other line is single.
  const bool uses_lines = pb.method != Method::Point;
  const bool grouped_blocks = pb.method == Method::PointStructRiemanLine;
  const bool parallel_constraints = pb.method == Method::PointOrthLineConstr;
  const bool orth_blocks = pb.method == Method::PointOrthLine ||
                           pb.method == Method::PointOrthLineConstr;

  std::unordered_map<Id, const LineRecord*> line_by_id;
  for (const LineRecord* l : lines) {
    line_by_id.emplace(l->id, l);
  }
  std::vector<std::pair<Id, std::vector<Id>>> surviving_groups;
  std::unordered_set<Id> grouped_line_ids;
  for (const GroupRecord* g : groups) {
    std::vector<Id> members;
    for (const Id lid : g->line_ids) {
      if (kept_lines.count(lid) != 0) {
        members.push_back(lid);
      }
    }
    if (members.size() >= 2) {
      for (const Id lid : members) {
        grouped_line_ids.insert(lid);
      }
      surviving_groups.emplace_back(g->id, std::move(members));
    }
  }

  // Line target of every surviving line id under this method.
  struct Target {
    Problem::LineTarget target;
    int block;
    int member;
  };
  std::unordered_map<Id, Target> line_target;

  if (uses_lines) {
    if (orth_blocks) {
      // With explicit parallelism factors the members of a group must agree
      // in orientation, or the factor would penalize anti-parallel pairs.
      std::unordered_map<Id, double> orientation;
      if (parallel_constraints) {
        for (const auto& [gid, members] : surviving_groups) {
          const Vec3 d0 = line_by_id[members.front()]->line.d;
          for (const Id lid : members) {
            orientation[lid] =
                line_by_id[lid]->line.d.dot(d0) < 0.0 ? -1.0 : 1.0;
          }
        }
      }
      for (const LineRecord* l : lines) {
        if (kept_lines.count(l->id) == 0) continue;
        PluckerLine L = l->line;
        const auto it = orientation.find(l->id);
        if (it != orientation.end() && it->second < 0.0) {
          L.n = -L.n;
          L.d = -L.d;
        }
        line_target.emplace(
            l->id, Target{Problem::LineTarget::Orth,
                          static_cast<int>(pb.orth_ids.size()), 0});
        pb.orth_ids.push_back(l->id);
        pb.initial.orth_lines.push_back(orthonormal_from_plucker(L));
        pb.orth_blocks.push_back({-1, 4, false});
      }
      if (parallel_constraints) {
        for (const auto& [gid, members] : surviving_groups) {
          std::vector<int> blocks;
          for (const Id lid : members) {
            blocks.push_back(line_target.at(lid).block);
          }
          for (int c = 0; c < static_cast<int>(blocks.size()); ++c) {
            pb.parallel_factors.push_back({blocks, c});
          }
        }
      }
    } else if (grouped_blocks) {
      for (const auto& [gid, members] : surviving_groups) {
        std::vector<const LineRecord*> records;
        for (const Id lid : members) {
          records.push_back(line_by_id.at(lid));
        }
        const int block = static_cast<int>(pb.group_ids.size());
        ParallelGroup g = init_group_block(records);
        for (int m = 0; m < static_cast<int>(members.size()); ++m) {
          line_target.emplace(members[m],
                              Target{Problem::LineTarget::GroupMember, block, m});
        }
        pb.group_ids.push_back(gid);
        pb.group_member_ids.push_back(members);
        pb.group_blocks.push_back({-1, g.tangent_dim(), false});
        pb.initial.groups.push_back(std::move(g));
      }
      for (const LineRecord* l : lines) {
        if (kept_lines.count(l->id) == 0 || grouped_line_ids.count(l->id) != 0) {
          continue;
        }
        line_target.emplace(
            l->id, Target{Problem::LineTarget::Rieman,
                          static_cast<int>(pb.rieman_ids.size()), 0});
        pb.rieman_ids.push_back(l->id);
        pb.initial.rieman_lines.push_back(rieman_from_plucker(l->line));
        pb.rieman_blocks.push_back({-1, 4, false});
      }
    } else {  // Point_RiemanLine: every line is an independent block
      for (const LineRecord* l : lines) {
        if (kept_lines.count(l->id) == 0) continue;
        line_target.emplace(
            l->id, Target{Problem::LineTarget::Rieman,
                          static_cast<int>(pb.rieman_ids.size()), 0});
        pb.rieman_ids.push_back(l->id);
        pb.initial.rieman_lines.push_back(rieman_from_plucker(l->line));
        pb.rieman_blocks.push_back({-1, 4, false});
      }
    }
  }

  for (const PointObservation& o : graph.point_observations) {
    const auto it = point_index.find(o.point_id);
    if (it == point_index.end()) continue;
    pb.point_factors.push_back(
        {pose_index.at(o.pose_id), it->second, o.pixel});
  }
  if (uses_lines) {
    for (const LineObservation& o : graph.line_observations) {
      const auto it = line_target.find(o.line_id);
      if (it == line_target.end()) continue;
      pb.line_factors.push_back({pose_index.at(o.pose_id), it->second.target,
                                 it->second.block, it->second.member, o});
    }
  }

  if ((!graph.point_observations.empty() || !graph.line_observations.empty()) &&
      pb.num_factors() == 0) {
    throw ValidationError("no factor survives pruning under method " +
                          method_name(pb.method));
  }

  pb.census.n_poses = static_cast<std::int64_t>(pb.pose_ids.size());
  pb.census.n_points = static_cast<std::int64_t>(pb.point_ids.size());
  pb.census.n_single_lines =
      static_cast<std::int64_t>(pb.orth_ids.size() + pb.rieman_ids.size());
  for (const auto& members : pb.group_member_ids) {
    pb.census.group_sizes.push_back(static_cast<std::int64_t>(members.size()));
  }
  pb.residual_blocks = pb.num_factors();
  pb.residual_scalars =
      2 * static_cast<std::int64_t>(pb.point_factors.size()) +
      2 * static_cast<std::int64_t>(pb.line_factors.size()) +
      static_cast<std::int64_t>(pb.parallel_factors.size());

  pb.rebuild_columns();
  return pb;
}

double evaluate_cost(const Problem& pb, const ProblemState& state,
                     const RobustLoss& loss, std::int64_t* deactivated) {
  std::int64_t dead = 0;
  double cost = 0.0;
  std::vector<PoseSE3> cam;
  cam.reserve(state.poses.size());
  for (const PoseSE3& p : state.poses) {
    cam.push_back(p.inverse());
  }
  const Mat3 Kl = line_projection_matrix(pb.intrinsics);

  Vec2 r;
  for (const Problem::PointFactor& f : pb.point_factors) {
    if (!eval_point_factor(pb.intrinsics, cam[f.pose], state.points[f.point],
                           f.pixel, &r)) {
      ++dead;
      continue;
    }
    cost += robust_weight(loss, r.squaredNorm()).first;
  }
  for (const Problem::LineFactor& f : pb.line_factors) {
    if (!eval_line_factor(Kl, cam[f.pose], f.obs, target_line(state, f),
                          &r)) {
      ++dead;
      continue;
    }
    cost += robust_weight(loss, r.squaredNorm()).first;
  }
  std::vector<UnitVector3> dirs;
  for (const Problem::ParallelFactor& f : pb.parallel_factors) {
    if (!parallel_directions(state, f, &dirs, nullptr)) {
      ++dead;
      continue;
    }
    const double rp = parallel_residual(dirs, f.center);
    cost += robust_weight(loss, rp * rp).first;
  }
  if (deactivated != nullptr) {
    *deactivated = dead;
  }
  return cost;
}

Linearization linearize(const Problem& pb, const ProblemState& state,
                        const RobustLoss& loss) {
  Linearization lin;
  lin.H.resize(pb.num_cols, pb.num_cols);
  lin.g = VecX::Zero(pb.num_cols);

  std::vector<PoseSE3> cam;
  cam.reserve(state.poses.size());
  for (const PoseSE3& p : state.poses) {
    cam.push_back(p.inverse());
  }
  const Mat3 Kl = line_projection_matrix(pb.intrinsics);

  std::vector<TangentBasis> rieman_bases;
  rieman_bases.reserve(state.rieman_lines.size());
  for (const RiemanLine& r : state.rieman_lines) {
    rieman_bases.push_back(tangent_basis(r.direction()));
  }
  std::vector<TangentBasis> group_bases;
  group_bases.reserve(state.groups.size());
  for (const ParallelGroup& g : state.groups) {
    group_bases.push_back(tangent_basis(g.direction()));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(pb.num_factors()) * 96 +
                   static_cast<std::size_t>(pb.num_cols));
  // Keep the full diagonal in the pattern so damping can always be applied.
  for (int i = 0; i < pb.num_cols; ++i) {
    triplets.emplace_back(i, i, 0.0);
  }

  // Returns false (factor deactivated) on a non-finite Jacobian.
  auto accumulate = [&](const VecX& r,
                        const std::vector<std::tuple<int, int, MatX>>& blocks) {
    for (const auto& [c, d, J] : blocks) {
      if (!J.allFinite()) {
        return false;
      }
    }
    const auto [rho, w] = robust_weight(loss, r.squaredNorm());
    lin.cost += rho;
    for (const auto& [ca, da, Ja] : blocks) {
      lin.g.segment(ca, da) += 2.0 * w * Ja.transpose() * r;
      for (const auto& [cb, db, Jb] : blocks) {
        const MatX Hab = 2.0 * w * Ja.transpose() * Jb;
        for (int i = 0; i < da; ++i) {
          for (int j = 0; j < db; ++j) {
            triplets.emplace_back(ca + i, cb + j, Hab(i, j));
          }
        }
      }
    }
    return true;
  };

  std::vector<std::tuple<int, int, MatX>> blocks;
  Vec2 r2;

  for (const Problem::PointFactor& f : pb.point_factors) {
    if (!eval_point_factor(pb.intrinsics, cam[f.pose], state.points[f.point],
                           f.pixel, &r2)) {
      ++lin.deactivated;
      continue;
    }
    blocks.clear();
    const Problem::Block& bp = pb.pose_blocks[f.pose];
    const Problem::Block& bq = pb.point_blocks[f.point];
    Mat26 J_pose;
    Mat23 J_point;
    point_jacobians(cam[f.pose], state.points[f.point], pb.intrinsics,
                    bp.fixed ? nullptr : &J_pose,
                    bq.fixed ? nullptr : &J_point);
    if (!bp.fixed) blocks.emplace_back(bp.col, 6, J_pose);
    if (!bq.fixed) blocks.emplace_back(bq.col, 3, J_point);
    if (!accumulate(r2, blocks)) {
      ++lin.deactivated;
    }
  }

  for (const Problem::LineFactor& f : pb.line_factors) {
    const PluckerLine L_w = target_line(state, f);
    if (!eval_line_factor(Kl, cam[f.pose], f.obs, L_w, &r2)) {
      ++lin.deactivated;
      continue;
    }
    blocks.clear();
    const Problem::Block& bp = pb.pose_blocks[f.pose];
    if (!bp.fixed) {
      blocks.emplace_back(bp.col, 6,
                          line_jacobian_pose(f.obs, L_w, cam[f.pose],
                                             pb.intrinsics));
    }
    switch (f.target) {
      case Problem::LineTarget::Orth: {
        const Problem::Block& bl = pb.orth_blocks[f.block];
        if (!bl.fixed) {
          blocks.emplace_back(
              bl.col, 4,
              line_jacobian_orthonormal(f.obs, state.orth_lines[f.block],
                                        cam[f.pose], pb.intrinsics));
        }
        break;
      }
      case Problem::LineTarget::Rieman: {
        const Problem::Block& bl = pb.rieman_blocks[f.block];
        if (!bl.fixed) {
          const RiemanLine& rl = state.rieman_lines[f.block];
          blocks.emplace_back(
              bl.col, 4,
              line_jacobian_rieman(f.obs, rl.direction(),
                                   rieman_bases[f.block], rl.normal(),
                                   rl.scale(), cam[f.pose], pb.intrinsics));
        }
        break;
      }
      case Problem::LineTarget::GroupMember: {
        const Problem::Block& bl = pb.group_blocks[f.block];
        if (!bl.fixed) {
          const ParallelGroup& g = state.groups[f.block];
          const Mat24 Jm = line_jacobian_rieman(
              f.obs, g.direction(), group_bases[f.block],
              g.members()[f.member].normal, g.members()[f.member].scale,
              cam[f.pose], pb.intrinsics);
          // One member touches only the shared-direction pair and its own
          // gamma/scale pair; scatter those two runs, not the padded block.
          blocks.emplace_back(bl.col, 2, Jm.leftCols<2>());
          blocks.emplace_back(bl.col + 2 + 2 * f.member, 2, Jm.rightCols<2>());
        }
        break;
      }
    }
    if (!accumulate(r2, blocks)) {
      ++lin.deactivated;
    }
  }

  std::vector<UnitVector3> dirs;
  std::vector<double> signs;
  for (const Problem::ParallelFactor& f : pb.parallel_factors) {
    if (!parallel_directions(state, f, &dirs, &signs)) {
      ++lin.deactivated;
      continue;
    }
    VecX r1(1);
    r1(0) = parallel_residual(dirs, f.center);
    const auto Jdir = parallel_jacobian(dirs, f.center);
    blocks.clear();
    for (std::size_t m = 0; m < f.blocks.size(); ++m) {
      const Problem::Block& bl = pb.orth_blocks[f.blocks[m]];
      if (bl.fixed) continue;
      const OrthonormalLine& o = state.orth_lines[f.blocks[m]];
      // d_hat(rho) = sign(w2) (U Exp(rho)).col(1); phi does not move it.
      MatX J = MatX::Zero(1, 4);
      J.leftCols<3>() = Jdir[m] * (signs[m] * -(o.U * skew(Vec3::UnitY())));
      blocks.emplace_back(bl.col, 4, J);
    }
    if (!accumulate(r1, blocks)) {
      ++lin.deactivated;
    }
  }

  lin.H.setFromTriplets(triplets.begin(), triplets.end());
  return lin;
}

ProblemState retract_state(const Problem& pb, const ProblemState& state,
                           const VecX& delta) {
  if (delta.size() != pb.num_cols) {
    throw std::invalid_argument("retract_state: delta size mismatch");
  }
  ProblemState out = state;
  for (std::size_t i = 0; i < pb.pose_blocks.size(); ++i) {
    const Problem::Block& b = pb.pose_blocks[i];
    if (!b.fixed) {
      out.poses[i] = se3_retract(state.poses[i], delta.segment<6>(b.col));
    }
  }
  for (std::size_t i = 0; i < pb.point_blocks.size(); ++i) {
    const Problem::Block& b = pb.point_blocks[i];
    if (!b.fixed) {
      out.points[i] += delta.segment<3>(b.col);
    }
  }
  for (std::size_t i = 0; i < pb.orth_blocks.size(); ++i) {
    const Problem::Block& b = pb.orth_blocks[i];
    if (!b.fixed) {
      out.orth_lines[i] = orthonormal_retract(
          state.orth_lines[i], delta.segment<3>(b.col), delta(b.col + 3));
    }
  }
  for (std::size_t i = 0; i < pb.rieman_blocks.size(); ++i) {
    const Problem::Block& b = pb.rieman_blocks[i];
    if (!b.fixed) {
      RiemanTangent t;
      t.delta_theta = delta.segment<2>(b.col);
      t.delta_gamma = delta(b.col + 2);
      t.delta_scale = delta(b.col + 3);
      out.rieman_lines[i] = rieman_retract(state.rieman_lines[i], t);
    }
  }
  for (std::size_t i = 0; i < pb.group_blocks.size(); ++i) {
    const Problem::Block& b = pb.group_blocks[i];
    if (!b.fixed) {
      const std::size_t k = pb.initial.groups[i].members().size();
      std::vector<GammaScale> per_line(k);
      for (std::size_t m = 0; m < k; ++m) {
        per_line[m] = {delta(b.col + 2 + 2 * static_cast<int>(m)),
                       delta(b.col + 3 + 2 * static_cast<int>(m))};
      }
      out.groups[i] =
          group_retract(state.groups[i], delta.segment<2>(b.col), per_line);
    }
  }
  return out;
}

// Every factor is invariant to rescaling the whole estimate about the gauge
// camera's center (pixels and direction misalignments cannot see scale), so
// damped steps can drift along that flat direction: they come out
// damping-orthogonal to it, not orthogonal. Of the cost-equal states on the
// orbit, hand back the one whose scale matches the initialization - the
// free-network gauge choice. All-or-nothing: any degenerate intermediate
// leaves the state untouched.
void reanchor_scale(const Problem& pb, ProblemState* state) {
  int gauge = -1;
  for (std::size_t i = 0; i < pb.pose_blocks.size(); ++i) {
    if (pb.pose_blocks[i].fixed) {
      if (gauge >= 0) {
        return;  // two anchors pin the scale already
      }
      gauge = static_cast<int>(i);
    }
  }
  if (gauge < 0) {
    return;
  }
  for (const auto* blocks : {&pb.point_blocks, &pb.orth_blocks,
                             &pb.rieman_blocks, &pb.group_blocks}) {
    for (const Problem::Block& b : *blocks) {
      if (b.fixed) {
        return;  // a fixed landmark pins the scale
      }
    }
  }

  // Least-squares scale over the camera centers: the s minimizing
  // sum |c0 + s (t_i - c0) - t_i_init|^2, so the projection of the final
  // state onto the orbit lands as close to the initialization as the orbit
  // allows.
  const Vec3 c0 = state->poses[gauge].translation();
  double dot = 0.0;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < state->poses.size(); ++i) {
    if (pb.pose_blocks[i].fixed) {
      continue;
    }
    const Vec3 r_init = pb.initial.poses[i].translation() - c0;
    const Vec3 r_now = state->poses[i].translation() - c0;
    dot += r_init.dot(r_now);
    norm2 += r_now.squaredNorm();
  }
  if (norm2 < 1e-18) {
    return;
  }
  const double s = dot / norm2;
  if (!std::isfinite(s) || s <= 0.0 || s == 1.0) {
    return;
  }

  ProblemState scaled = *state;
  const auto move = [&](const Vec3& p) -> Vec3 { return c0 + s * (p - c0); };
  for (std::size_t i = 0; i < scaled.poses.size(); ++i) {
    if (pb.pose_blocks[i].fixed) {
      continue;
    }
    scaled.poses[i] = PoseSE3(state->poses[i].rotation(),
                              move(state->poses[i].translation()));
  }
  for (Vec3& p : scaled.points) {
    p = move(p);
  }
  // Scaling a line about c0 keeps its direction and maps the moment to
  // s n + (1 - s) d x c0 (write n = d x p for a point p on the line).
  for (std::size_t i = 0; i < scaled.orth_lines.size(); ++i) {
    const PluckerLine L = plucker_from_orthonormal(state->orth_lines[i]);
    const Vec3 n_new = s * L.n + (1.0 - s) * L.d.cross(c0);
    if (n_new.norm() <= 1e-9 * L.d.norm()) {
      return;
    }
    scaled.orth_lines[i] = orthonormal_from_plucker({n_new, L.d});
  }
  for (std::size_t i = 0; i < scaled.rieman_lines.size(); ++i) {
    const RiemanLine& r = state->rieman_lines[i];
    const Vec3 n_new = s * r.scale() * r.normal().vec() +
                       (1.0 - s) * r.direction().vec().cross(c0);
    const double w = n_new.norm();
    if (w <= 1e-9) {
      return;
    }
    scaled.rieman_lines[i] =
        RiemanLine(r.direction(), UnitVector3::normalized(n_new), w);
  }
  for (std::size_t i = 0; i < scaled.groups.size(); ++i) {
    const ParallelGroup& g = state->groups[i];
    const Vec3 shift = g.direction().vec().cross(c0);
    std::vector<ParallelGroup::Member> members = g.members();
    for (ParallelGroup::Member& m : members) {
      const Vec3 n_new = s * m.scale * m.normal.vec() + (1.0 - s) * shift;
      const double w = n_new.norm();
      if (w <= 1e-9) {
        return;
      }
      m = {UnitVector3::normalized(n_new), w};
    }
    scaled.groups[i] = ParallelGroup(g.direction(), std::move(members));
  }
  *state = std::move(scaled);
}

SolveReport lm_solve(const Problem& pb, const SolveConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  SolveReport report;
  report.state = pb.initial;

  auto finish = [&](Termination why) {
    report.termination = why;
    report.final_cost = report.trace.empty() ? 0.0 : report.trace.front().cost;
    for (const IterationRecord& it : report.trace) {
      if (it.accepted) {
        report.final_cost = it.cost;
      }
    }
    if (report.accepted_steps > 0) {
      reanchor_scale(pb, &report.state);
    }
    evaluate_cost(pb, report.state, config.loss, &report.deactivated_final);
    report.seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    double last = report.initial_cost;
    for (const IterationRecord& it : report.trace) {
      if (it.iteration == 0 || !it.accepted) continue;
      if (it.cost > last) {
        throw SolverError("internal: accepted cost increased");
      }
      last = it.cost;
    }
    return report;
  };

  double mu = config.damping_initial;
  report.initial_cost = evaluate_cost(pb, report.state, config.loss, nullptr);
  report.trace.push_back({0, report.initial_cost, true, mu});

  if (pb.num_factors() == 0) {
    return finish(Termination::NoFactors);
  }
  if (pb.num_cols == 0) {
    return finish(Termination::AllFixed);
  }

  Linearization lin = linearize(pb, report.state, config.loss);
  double cost = lin.cost;

  Eigen::SparseMatrix<double> damp(pb.num_cols, pb.num_cols);
  auto build_damp = [&]() {
    std::vector<Eigen::Triplet<double>> d;
    d.reserve(pb.num_cols);
    for (int i = 0; i < pb.num_cols; ++i) {
      d.emplace_back(i, i, std::max(lin.H.coeff(i, i), 1e-12));
    }
    damp.setFromTriplets(d.begin(), d.end());
  };
  build_damp();

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  for (int attempt = 1; attempt <= config.max_iterations; ++attempt) {
    const Eigen::SparseMatrix<double> Hd = lin.H + mu * damp;
    ldlt.compute(Hd);
    bool solved = ldlt.info() == Eigen::Success;
    VecX delta;
    if (solved) {
      delta = ldlt.solve(-lin.g);
      solved = delta.allFinite();
    }
    if (!solved) {
      report.trace.push_back({attempt, cost, false, mu});
      ++report.iterations;
      mu *= config.damping_up;
      if (mu > 1e16) {
        // Name the blocks whose tangent directions collect no information.
        std::string who;
        auto scan = [&](const std::vector<Problem::Block>& bs,
                        const std::vector<Id>& ids, const char* kind) {
          for (std::size_t i = 0; i < bs.size(); ++i) {
            if (bs[i].fixed) continue;
            double diag = 0.0;
            for (int c = 0; c < bs[i].dim; ++c) {
              diag = std::max(diag, lin.H.coeff(bs[i].col + c, bs[i].col + c));
            }
            if (diag <= 1e-12) {
              who += std::string(who.empty() ? "" : ", ") + kind + " " +
                     std::to_string(ids[i]);
            }
          }
        };
        scan(pb.pose_blocks, pb.pose_ids, "pose");
        scan(pb.point_blocks, pb.point_ids, "point");
        scan(pb.orth_blocks, pb.orth_ids, "line");
        scan(pb.rieman_blocks, pb.rieman_ids, "line");
        scan(pb.group_blocks, pb.group_ids, "group");
        throw SolverError(
            "damped normal equations stay singular at maximum damping" +
            (who.empty() ? std::string()
                         : "; unconstrained blocks: " + who));
      }
      continue;
    }

    bool accepted = false;
    double c_new = cost;
    ProblemState candidate;
    try {
      candidate = retract_state(pb, report.state, delta);
      c_new = evaluate_cost(pb, candidate, config.loss, nullptr);
      accepted = std::isfinite(c_new) && c_new < cost;
    } catch (const RetractionDegenerateError&) {
      accepted = false;  // treat an unrepresentable step as rejected
      c_new = cost;
    }
    report.trace.push_back({attempt, c_new, accepted, mu});
    ++report.iterations;

    if (accepted) {
      const double rel = (cost - c_new) / std::max(cost, 1e-300);
      report.state = std::move(candidate);
      cost = c_new;
      ++report.accepted_steps;
      mu *= config.damping_down;
      if (rel < config.rel_decrease_tol) {
        return finish(Termination::RelativeDecrease);
      }
      if (delta.norm() < config.step_norm_tol) {
        return finish(Termination::StepNorm);
      }
      lin = linearize(pb, report.state, config.loss);
      build_damp();
    } else {
      mu *= config.damping_up;
      if (delta.norm() < config.step_norm_tol) {
        return finish(Termination::StepNorm);
      }
      if (mu > 1e16) {
        return finish(Termination::StepNorm);
      }
    }
  }
  return finish(Termination::MaxIterations);
}

void write_back(const Problem& pb, const ProblemState& state,
                FactorGraph* graph) {
  std::unordered_map<Id, PoseRecord*> pose_rec;
  for (PoseRecord& p : graph->poses) {
    pose_rec.emplace(p.id, &p);
  }
  std::unordered_map<Id, PointRecord*> point_rec;
  for (PointRecord& p : graph->points) {
    point_rec.emplace(p.id, &p);
  }
  std::unordered_map<Id, LineRecord*> line_rec;
  for (LineRecord& l : graph->lines) {
    line_rec.emplace(l.id, &l);
  }

  for (std::size_t i = 0; i < pb.pose_ids.size(); ++i) {
    *pose_rec.at(pb.pose_ids[i]) =
        make_pose_record(pb.pose_ids[i], state.poses[i]);
  }
  for (std::size_t i = 0; i < pb.point_ids.size(); ++i) {
    point_rec.at(pb.point_ids[i])->p = state.points[i];
  }
  for (std::size_t i = 0; i < pb.orth_ids.size(); ++i) {
    line_rec.at(pb.orth_ids[i])->line =
        plucker_from_orthonormal(state.orth_lines[i]);
  }
  for (std::size_t i = 0; i < pb.rieman_ids.size(); ++i) {
    line_rec.at(pb.rieman_ids[i])->line =
        plucker_from_rieman(state.rieman_lines[i]);
  }
  for (std::size_t i = 0; i < pb.group_member_ids.size(); ++i) {
    const ParallelGroup& g = state.groups[i];
    for (std::size_t m = 0; m < pb.group_member_ids[i].size(); ++m) {
      line_rec.at(pb.group_member_ids[i][m])->line =
          PluckerLine{g.members()[m].scale * g.members()[m].normal.vec(),
                      g.direction().vec()};
    }
  }
}

}  // namespace rieman
