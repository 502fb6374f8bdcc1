#pragma once

#include "rieman/manifold.hpp"

#include <cstdint>
#include <vector>

namespace rieman {

struct EndpointLine {
  Vec3 p_start;
  Vec3 p_end;
};

// Pluecker pair (moment n, direction d) with n.dot(d) = 0. Constructed from
// endpoints as n = p_start x p_end, d = p_start - p_end, jointly sign-fixed
// so the first nonzero component of d is positive.
struct PluckerLine {
  Vec3 n;
  Vec3 d;
};

// SO(3) x SO(2) factorization: U = [n/|n|, d/|d|, n x d / |n x d|],
// W = [[|n|, -|d|], [|d|, |n|]] / sqrt(|n|^2 + |d|^2).
struct OrthonormalLine {
  Mat3 U;
  Mat2 W;
};

// Minimal 4-DoF line: direction u2 on the sphere, unit normal u1 on the
// circle orthogonal to u2, positive scale omega. Pluecker assembly is
// n = omega * u1, d = u2.
class RiemanLine {
 public:
  RiemanLine(const UnitVector3& direction, const UnitVector3& normal,
             double scale);

  const UnitVector3& direction() const { return u2_; }  // u2
  const UnitVector3& normal() const { return u1_; }     // u1
  double scale() const { return omega_; }               // omega

 private:
  UnitVector3 u2_;
  UnitVector3 u1_;
  double omega_;
};

// k >= 2 lines sharing one direction: 2 + 2k DoF instead of 4k.
class ParallelGroup {
 public:
  struct Member {
    UnitVector3 normal;
    double scale;
  };

  ParallelGroup(const UnitVector3& direction, std::vector<Member> members);

  const UnitVector3& direction() const { return u2_; }
  const std::vector<Member>& members() const { return members_; }
  int tangent_dim() const { return 2 + 2 * static_cast<int>(members_.size()); }

 private:
  UnitVector3 u2_;
  std::vector<Member> members_;
};

// Minimal update (delta_theta on the direction sphere, delta_gamma on the
// normal circle, delta_scale on log omega).
struct RiemanTangent {
  Vec2 delta_theta = Vec2::Zero();
  double delta_gamma = 0.0;
  double delta_scale = 0.0;
};

// Per-member part of a group update.
struct GammaScale {
  double delta_gamma = 0.0;
  double delta_scale = 0.0;
};

PluckerLine plucker_from_endpoints(const EndpointLine& line);
RiemanLine rieman_from_plucker(const PluckerLine& L);
PluckerLine plucker_from_rieman(const RiemanLine& r);
OrthonormalLine orthonormal_from_plucker(const PluckerLine& L);
PluckerLine plucker_from_orthonormal(const OrthonormalLine& o);

// U <- U Exp(rho), W <- W Rot2(phi).
OrthonormalLine orthonormal_retract(const OrthonormalLine& o, const Vec3& rho,
                                    double phi);

// Move the direction along the sphere geodesic, re-orthogonalize the normal
// against the new direction, rotate it by delta_gamma on the new circle,
// scale omega multiplicatively by exp(delta_scale). A zero tangent returns
// r bitwise unchanged.
RiemanLine rieman_retract(const RiemanLine& r, const RiemanTangent& t);

// Shared-direction update followed by per-member circle/scale updates; all
// members see the identical post-update direction.
ParallelGroup group_retract(const ParallelGroup& g, const Vec2& delta_theta,
                            const std::vector<GammaScale>& per_line);

// Euclidean distance from p to the line.
double point_line_distance(const PluckerLine& L, const Vec3& p);

// Optimizable-block census of a graph under a given method mapping.
struct GraphCensus {
  std::int64_t n_poses = 0;
  std::int64_t n_points = 0;
  std::int64_t n_single_lines = 0;        // 4-DoF blocks (orthonormal or single)
  std::vector<std::int64_t> group_sizes;  // one entry per 2+2k group block
};

struct ParameterCount {
  std::int64_t blocks = 0;
  std::int64_t effective_params = 0;
};

ParameterCount count_parameters(const GraphCensus& census);

}  // namespace rieman
