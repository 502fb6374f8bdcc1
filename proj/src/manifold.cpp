#include "rieman/manifold.hpp"

#include <cmath>

namespace rieman {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

UnitVector3::UnitVector3(const Vec3& v) : v_(v) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-6) {
    throw std::invalid_argument("UnitVector3: input norm deviates from 1 by " +
                                std::to_string(std::abs(n - 1.0)));
  }
  v_ /= n;
}

UnitVector3 UnitVector3::normalized(const Vec3& v) {
  const double n = v.norm();
  if (n <= 1e-12) {
    throw std::invalid_argument("UnitVector3: cannot normalize near-zero vector");
  }
  return UnitVector3(v / n, Unchecked{});
}

PoseSE3::PoseSE3(const Mat3& rotation, const Vec3& translation)
    : R_(rotation), t_(translation) {
  const Mat3 err = R_.transpose() * R_ - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-9 || R_.determinant() < 0.0) {
    throw std::invalid_argument("PoseSE3: rotation is not orthonormal");
  }
}

PoseSE3 PoseSE3::inverse() const {
  return PoseSE3(R_.transpose(), -(R_.transpose() * t_), Unchecked{});
}

PoseSE3 PoseSE3::operator*(const PoseSE3& o) const {
  return PoseSE3(R_ * o.R_, R_ * o.t_ + t_, Unchecked{});
}

Mat3 skew(const Vec3& w) {
  Mat3 W;
  W << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return W;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 W = skew(w);
  if (theta < 1e-8) {
    // Second-order series; exact identity at w = 0.
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * W + b * W * W;
}

Vec3 so3_log(const Mat3& R) {
  const Vec3 axis_raw(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double s = 0.5 * axis_raw.norm();  // sin(theta)
  const double c = (R.trace() - 1.0) * 0.5;
  // atan2 keeps the angle well conditioned at both ends, unlike acos whose
  // error blows up as eps / sin(theta) approaching pi.
  const double theta = std::atan2(s, c);
  if (theta < 1e-8) {
    return 0.5 * axis_raw;
  }
  if (theta > kPi - 1e-8) {
    // The antisymmetric part is below roundoff here; recover the axis from
    // the symmetric part via its largest diagonal element.
    const Mat3 S = 0.5 * (R + Mat3::Identity());
    int k = 0;
    S.diagonal().maxCoeff(&k);
    Vec3 axis = S.col(k) / std::sqrt(S(k, k));
    axis.normalize();
    if (axis_raw.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  return theta * axis_raw.normalized();
}

PoseSE3 se3_exp(const Vec6& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double theta = w.norm();
  const Mat3 W = skew(w);
  Mat3 V;
  if (theta < 1e-8) {
    V = Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  } else {
    const double t2 = theta * theta;
    V = Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * W +
        ((theta - std::sin(theta)) / (t2 * theta)) * W * W;
  }
  return PoseSE3(so3_exp(w), V * v);
}

TangentBasis tangent_basis(const UnitVector3& u) {
  const Vec3& v = u.vec();
  int k = 0;
  double best = std::abs(v.x());
  if (std::abs(v.y()) < best) {
    best = std::abs(v.y());
    k = 1;
  }
  if (std::abs(v.z()) < best) {
    k = 2;
  }
  const Vec3 seed = Vec3::Unit(k);
  const Vec3 bx = (seed - seed.dot(v) * v).normalized();
  const Vec3 by = v.cross(bx);
  return TangentBasis{UnitVector3::normalized(bx), UnitVector3::normalized(by),
                      u};
}

UnitVector3 sphere_exp(const UnitVector3& u, const Vec3& dm) {
  if (std::abs(dm.dot(u.vec())) > 1e-6) {
    throw std::invalid_argument("sphere_exp: dm is not tangent at u");
  }
  const double theta = dm.norm();
  if (theta >= kPi) {
    throw std::invalid_argument("sphere_exp: |dm| must be below pi");
  }
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    const Vec3 v = u.vec() * (1.0 - 0.5 * t2) + dm * (1.0 - t2 / 6.0);
    return UnitVector3::normalized(v);
  }
  const Vec3 v = u.vec() * std::cos(theta) + (dm / theta) * std::sin(theta);
  return UnitVector3::normalized(v);
}

Mat32 sphere_exp_jacobian(const UnitVector3& u, const Vec3& dm,
                          const TangentBasis& basis) {
  if (std::abs(dm.dot(u.vec())) > 1e-6) {
    throw std::invalid_argument("sphere_exp_jacobian: dm is not tangent at u");
  }
  Mat32 B;
  B.col(0) = basis.b_x.vec();
  B.col(1) = basis.b_y.vec();
  const double theta = dm.norm();
  if (theta == 0.0) {
    return B;
  }
  const Vec3 m = dm / theta;
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const Mat3 J = -s * u.vec() * m.transpose() + c * m * m.transpose() +
                 (s / theta) * (Mat3::Identity() - m * m.transpose());
  return J * B;
}

Vec3 circle_rotate(const UnitVector3& u1, const UnitVector3& u3,
                   double dgamma, double lambda) {
  if (std::abs(u1.dot(u3)) > 1e-6) {
    throw std::invalid_argument("circle_rotate: u1 and u3 are not orthogonal");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("circle_rotate: lambda must be positive");
  }
  return lambda * (std::cos(dgamma) * u1.vec() + std::sin(dgamma) * u3.vec());
}

PoseSE3 se3_retract(const PoseSE3& pose, const Vec6& xi) {
  return pose * se3_exp(xi);
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace rieman
