#include "rieman/line_repr.hpp"

#include <cmath>
#include <utility>

namespace rieman {

namespace {

// Flip (n, d) together if the first nonzero component of d is negative.
void canonicalize_sign(Vec3& n, Vec3& d) {
  for (int i = 0; i < 3; ++i) {
    if (d[i] != 0.0) {
      if (d[i] < 0.0) {
        n = -n;
        d = -d;
      }
      return;
    }
  }
}

// Shared steps (2)-(5) of the minimal retraction: given the post-update
// direction v2, re-orthogonalize u1, rotate by dgamma, rescale omega.
ParallelGroup::Member retract_member(const UnitVector3& v2,
                                     const UnitVector3& u1, double omega,
                                     double dgamma, double dscale) {
  Vec3 proj = u1.vec() - u1.dot(v2) * v2.vec();
  const double pn = proj.norm();
  if (pn < 1e-9) {
    throw RetractionDegenerateError(
        "retraction collapses the normal onto the direction");
  }
  proj /= pn;
  const Vec3 u3 = v2.vec().cross(proj);
  const Vec3 rotated = std::cos(dgamma) * proj + std::sin(dgamma) * u3;
  return ParallelGroup::Member{UnitVector3::normalized(rotated),
                               omega * std::exp(dscale)};
}

}  // namespace

RiemanLine::RiemanLine(const UnitVector3& direction, const UnitVector3& normal,
                       double scale)
    : u2_(direction), u1_(normal), omega_(scale) {
  if (std::abs(u1_.dot(u2_)) > 1e-9) {
    throw std::invalid_argument("RiemanLine: normal not orthogonal to direction");
  }
  if (!(omega_ > 0.0)) {
    throw std::invalid_argument("RiemanLine: scale must be positive");
  }
}

ParallelGroup::ParallelGroup(const UnitVector3& direction,
                             std::vector<Member> members)
    : u2_(direction), members_(std::move(members)) {
  if (members_.size() < 2) {
    throw std::invalid_argument("ParallelGroup: needs at least two members");
  }
  for (const Member& m : members_) {
    if (std::abs(m.normal.dot(u2_)) > 1e-9) {
      throw std::invalid_argument(
          "ParallelGroup: member normal not orthogonal to direction");
    }
    if (!(m.scale > 0.0)) {
      throw std::invalid_argument("ParallelGroup: member scale must be positive");
    }
  }
}

PluckerLine plucker_from_endpoints(const EndpointLine& line) {
  Vec3 d = line.p_start - line.p_end;
  const double dn = d.norm();
  if (dn <= 1e-9) {
    throw DegenerateLineError("coincident endpoints");
  }
  Vec3 n = line.p_start.cross(line.p_end) / dn;
  d /= dn;
  canonicalize_sign(n, d);
  return PluckerLine{n, d};
}

RiemanLine rieman_from_plucker(const PluckerLine& L) {
  const double dn = L.d.norm();
  if (dn <= 1e-12) {
    throw DegenerateLineError("zero direction");
  }
  // Inputs are only orthogonal up to the graph tolerance; project the moment
  // exactly onto the plane orthogonal to the direction.
  const Vec3 d = L.d / dn;
  const Vec3 m = (L.n - L.n.dot(d) * d) / dn;
  const double omega = m.norm();
  if (omega <= 1e-9) {
    throw ThroughOriginError(
        "line passes through the origin; scale would vanish");
  }
  return RiemanLine(UnitVector3::normalized(d), UnitVector3::normalized(m),
                    omega);
}

PluckerLine plucker_from_rieman(const RiemanLine& r) {
  return PluckerLine{r.scale() * r.normal().vec(), r.direction().vec()};
}

OrthonormalLine orthonormal_from_plucker(const PluckerLine& L) {
  const double dn = L.d.norm();
  if (dn <= 1e-12) {
    throw DegenerateLineError("zero direction");
  }
  const Vec3 d = L.d / dn;
  const Vec3 m = L.n - L.n.dot(d) * d;  // exact orthogonality, see above
  const double nn = m.norm();
  if (nn / dn <= 1e-9) {
    throw ThroughOriginError("zero moment; orthonormal factorization undefined");
  }
  OrthonormalLine o;
  o.U.col(0) = m / nn;
  o.U.col(1) = d;
  o.U.col(2) = o.U.col(0).cross(d);
  const double lambda = std::sqrt(nn * nn + dn * dn);
  o.W << nn / lambda, -dn / lambda, dn / lambda, nn / lambda;
  return o;
}

PluckerLine plucker_from_orthonormal(const OrthonormalLine& o) {
  return PluckerLine{o.W(0, 0) * o.U.col(0), o.W(1, 0) * o.U.col(1)};
}

OrthonormalLine orthonormal_retract(const OrthonormalLine& o, const Vec3& rho,
                                    double phi) {
  OrthonormalLine out;
  out.U = o.U * so3_exp(rho);
  Mat2 rot;
  rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  out.W = o.W * rot;
  return out;
}

RiemanLine rieman_retract(const RiemanLine& r, const RiemanTangent& t) {
  if (t.delta_theta.x() == 0.0 && t.delta_theta.y() == 0.0 &&
      t.delta_gamma == 0.0 && t.delta_scale == 0.0) {
    return r;
  }
  const TangentBasis basis = tangent_basis(r.direction());
  const Vec3 dm =
      t.delta_theta.x() * basis.b_x.vec() + t.delta_theta.y() * basis.b_y.vec();
  const UnitVector3 v2 = sphere_exp(r.direction(), dm);
  const ParallelGroup::Member m =
      retract_member(v2, r.normal(), r.scale(), t.delta_gamma, t.delta_scale);
  return RiemanLine(v2, m.normal, m.scale);
}

ParallelGroup group_retract(const ParallelGroup& g, const Vec2& delta_theta,
                            const std::vector<GammaScale>& per_line) {
  if (per_line.size() != g.members().size()) {
    throw std::invalid_argument("group_retract: per-line update count mismatch");
  }
  bool all_zero = delta_theta.x() == 0.0 && delta_theta.y() == 0.0;
  for (const GammaScale& gs : per_line) {
    all_zero = all_zero && gs.delta_gamma == 0.0 && gs.delta_scale == 0.0;
  }
  if (all_zero) {
    return g;
  }
  const TangentBasis basis = tangent_basis(g.direction());
  const Vec3 dm =
      delta_theta.x() * basis.b_x.vec() + delta_theta.y() * basis.b_y.vec();
  const UnitVector3 v2 = sphere_exp(g.direction(), dm);
  std::vector<ParallelGroup::Member> members;
  members.reserve(g.members().size());
  for (std::size_t i = 0; i < g.members().size(); ++i) {
    members.push_back(retract_member(v2, g.members()[i].normal,
                                     g.members()[i].scale,
                                     per_line[i].delta_gamma,
                                     per_line[i].delta_scale));
  }
  return ParallelGroup(v2, std::move(members));
}

double point_line_distance(const PluckerLine& L, const Vec3& p) {
  const double dn = L.d.norm();
  if (dn <= 1e-12) {
    throw DegenerateLineError("zero direction");
  }
  // With n = p_start x p_end and unit d, every point a on the line satisfies
  // a x d = -n, so |p x d + n| is the distance.
  return (p.cross(L.d / dn) + L.n / dn).norm();
}

ParameterCount count_parameters(const GraphCensus& census) {
  ParameterCount out;
  out.blocks = census.n_poses + census.n_points + census.n_single_lines +
               static_cast<std::int64_t>(census.group_sizes.size());
  out.effective_params =
      6 * census.n_poses + 3 * census.n_points + 4 * census.n_single_lines;
  for (const std::int64_t k : census.group_sizes) {
    if (k < 2) {
      throw std::invalid_argument("count_parameters: group size below 2");
    }
    out.effective_params += 2 + 2 * k;
  }
  return out;
}

}  // namespace rieman
