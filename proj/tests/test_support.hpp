#pragma once

// Shared helpers for the test suites: deterministic random generators,
// central finite differences, and reference integrators that are
// independent of the implementations under test.

#include "rieman/line_repr.hpp"
#include "rieman/manifold.hpp"

#include <Eigen/Geometry>

#include <random>

namespace rieman::test {

inline constexpr double kFdStep = 1e-6;

// Central-difference Jacobian of f: R^N -> R^M around zero.
template <int M, int N, typename F>
Eigen::Matrix<double, M, N> fd_jacobian(const F& f, double h = kFdStep) {
  Eigen::Matrix<double, M, N> J;
  for (int j = 0; j < N; ++j) {
    Eigen::Matrix<double, N, 1> e = Eigen::Matrix<double, N, 1>::Zero();
    e[j] = h;
    const Eigen::Matrix<double, M, 1> hi = f(e);
    e[j] = -h;
    const Eigen::Matrix<double, M, 1> lo = f(e);
    J.col(j) = (hi - lo) / (2.0 * h);
  }
  return J;
}

// Central-difference derivative of a scalar function along one direction.
template <typename F>
double fd_directional(const F& f, double h = kFdStep) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  return Vec3(g(rng), g(rng), g(rng));
}

inline UnitVector3 random_unit(std::mt19937_64& rng) {
  Vec3 v = random_vec3(rng);
  while (v.norm() < 1e-3) {
    v = random_vec3(rng);
  }
  return UnitVector3::normalized(v);
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  while (q.norm() < 1e-3) {
    q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng));
  }
  return q.normalized().toRotationMatrix();
}

inline PoseSE3 random_pose(std::mt19937_64& rng, double translation_scale = 2.0) {
  return PoseSE3(random_rotation(rng), random_vec3(rng, translation_scale));
}

// A line built from two random endpoints, rejected while it runs too close
// to the origin for the minimal representation.
inline PluckerLine random_plucker(std::mt19937_64& rng) {
  for (;;) {
    const Vec3 a = random_vec3(rng, 3.0);
    const Vec3 b = random_vec3(rng, 3.0);
    if ((a - b).norm() < 1e-2) {
      continue;
    }
    const PluckerLine L = plucker_from_endpoints({a, b});
    if (L.n.norm() > 0.1) {
      return L;
    }
  }
}

inline RiemanLine random_rieman(std::mt19937_64& rng) {
  return rieman_from_plucker(random_plucker(rng));
}

// Reference geodesic on S^2 by RK4 integration of x'' = -|x'|^2 x, which
// preserves |x| = 1 and |x'| up to the integration error. Independent of
// the closed form under test.
inline Vec3 integrate_sphere_geodesic(const Vec3& u, const Vec3& m,
                                      int steps = 4000) {
  Vec3 x = u;
  Vec3 v = m;
  const double dt = 1.0 / static_cast<double>(steps);
  const auto acc = [](const Vec3& pos, const Vec3& vel) -> Vec3 {
    return -vel.squaredNorm() * pos;
  };
  for (int i = 0; i < steps; ++i) {
    const Vec3 k1x = v;
    const Vec3 k1v = acc(x, v);
    const Vec3 k2x = v + 0.5 * dt * k1v;
    const Vec3 k2v = acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
    const Vec3 k3x = v + 0.5 * dt * k2v;
    const Vec3 k3v = acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
    const Vec3 k4x = v + dt * k3v;
    const Vec3 k4v = acc(x + dt * k3x, v + dt * k3v);
    x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  return x;
}

// Matrix exponential by scaling-and-squaring over a plain Taylor series;
// a reference for the closed-form Lie group maps.
template <int N>
Eigen::Matrix<double, N, N> expm(const Eigen::Matrix<double, N, N>& A) {
  using MatN = Eigen::Matrix<double, N, N>;
  int squarings = 0;
  double norm = A.cwiseAbs().maxCoeff();
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  const MatN S = A / std::pow(2.0, squarings);
  MatN term = MatN::Identity();
  MatN sum = MatN::Identity();
  for (int k = 1; k <= 24; ++k) {
    term = term * S / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) {
    sum = sum * sum;
  }
  return sum;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace rieman::test
