#pragma once

#include "rieman/types.hpp"

namespace rieman {

// Unit 3-vector. Construction validates the norm (within 1e-6 of 1) and
// renormalizes to machine precision, so downstream code can rely on it.
class UnitVector3 {
 public:
  explicit UnitVector3(const Vec3& v);

  // Normalizes an arbitrary nonzero vector (norm > 1e-12 required).
  static UnitVector3 normalized(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double dot(const UnitVector3& o) const { return v_.dot(o.v_); }

 private:
  struct Unchecked {};
  UnitVector3(const Vec3& v, Unchecked) : v_(v) {}
  Vec3 v_;
};

// Right-handed orthonormal pair spanning the tangent plane at base:
// b_x x b_y = base.
struct TangentBasis {
  UnitVector3 b_x;
  UnitVector3 b_y;
  UnitVector3 base;
};

// Rigid transform with an orthonormal rotation (validated at construction).
class PoseSE3 {
 public:
  PoseSE3() : R_(Mat3::Identity()), t_(Vec3::Zero()) {}
  PoseSE3(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const { return R_; }
  const Vec3& translation() const { return t_; }

  PoseSE3 inverse() const;
  PoseSE3 operator*(const PoseSE3& o) const;
  Vec3 operator*(const Vec3& p) const { return R_ * p + t_; }

 private:
  struct Unchecked {};
  PoseSE3(const Mat3& R, const Vec3& t, Unchecked) : R_(R), t_(t) {}
  Mat3 R_;
  Vec3 t_;
};

Mat3 skew(const Vec3& w);
Mat3 so3_exp(const Vec3& w);
Vec3 so3_log(const Mat3& R);

// Full SE(3) exponential of xi = (rotation | translation).
PoseSE3 se3_exp(const Vec6& xi);

// Deterministic basis completion: the coordinate axis with the smallest
// |component| of u (ties to the lowest index) seeds Gram-Schmidt for b_x,
// then b_y = u x b_x.
TangentBasis tangent_basis(const UnitVector3& u);

// Geodesic step on S^2: u cos|dm| + (dm/|dm|) sin|dm|. dm must lie in the
// tangent plane at u (|dm.u| <= 1e-6) with |dm| < pi. Below |dm| < 1e-8 a
// second-order series avoids the 0/0; dm = 0 returns u exactly.
UnitVector3 sphere_exp(const UnitVector3& u, const Vec3& dm);

// d sphere_exp(u, dm + B h) / dh at h = 0, a 3x2 block. At dm = 0 this is
// exactly [b_x b_y].
Mat32 sphere_exp_jacobian(const UnitVector3& u, const Vec3& dm,
                          const TangentBasis& basis);

// lambda (cos(dgamma) u1 + sin(dgamma) u3) on the circle orthogonal to
// u1 x u3. Requires |u1.u3| <= 1e-6 and lambda > 0.
Vec3 circle_rotate(const UnitVector3& u1, const UnitVector3& u3,
                   double dgamma, double lambda);

// Right perturbation pose * Exp(xi), xi = (rotation | translation).
PoseSE3 se3_retract(const PoseSE3& pose, const Vec6& xi);

// Angle between two vectors, stable for small and near-pi angles.
double angle_between(const Vec3& a, const Vec3& b);

}  // namespace rieman
