#include "rieman/factors.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace rieman;
using namespace rieman::test;

namespace {

const CameraIntrinsics kCam{535.0, 535.0, 320.0, 240.0};

// J_fd and J must agree to the tolerance used by the acceptance gate.
template <typename A, typename B>
bool jacobian_close(const A& J, const B& Jfd) {
  const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
  return (J - Jfd).cwiseAbs().maxCoeff() <= 1e-5 * scale;
}

// A world point that projects inside a generous image window.
Vec3 visible_world_point(std::mt19937_64& rng, const PoseSE3& T_cw) {
  for (;;) {
    const Vec3 P = random_vec3(rng, 4.0);
    const Vec3 pc = T_cw * P;
    if (pc.z() < 0.5) {
      continue;
    }
    const Vec2 px = project(kCam, pc);
    if (px.x() > -500 && px.x() < 1100 && px.y() > -500 && px.y() < 1100) {
      return P;
    }
  }
}

// A world line whose camera-frame moment keeps the image line well defined.
PluckerLine observable_line(std::mt19937_64& rng, const PoseSE3& T_cw) {
  for (;;) {
    const PluckerLine L = random_plucker(rng);
    const PluckerLine Lc = transform_plucker(T_cw, L);
    if (Lc.n.head<2>().norm() > 0.2) {
      return L;
    }
  }
}

LineObservation random_segment_obs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0);
  LineObservation obs;
  obs.p_start = Vec2(u(rng), v(rng));
  obs.p_end = Vec2(u(rng), v(rng));
  return obs;
}

}  // namespace

TEST_CASE("project applies the pinhole model and rejects nonpositive depth") {
  CHECK(max_abs_diff(project(kCam, Vec3(0, 0, 1)), Vec2(320, 240)) == 0.0);
  CHECK(max_abs_diff(project(kCam, Vec3(1, -2, 2)),
                     Vec2(320 + 535.0 / 2.0, 240 - 535.0)) < 1e-12);
  CHECK_THROWS_AS(project(kCam, Vec3(0, 0, 0)), BehindCameraError);
  CHECK_THROWS_AS(project(kCam, Vec3(1, 1, -0.1)), BehindCameraError);
}

TEST_CASE("point_residual vanishes at the exact projection") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    const PoseSE3 T_wc = random_pose(rng);
    const PoseSE3 T_cw = T_wc.inverse();
    const Vec3 P = visible_world_point(rng, T_cw);
    const Vec2 pixel = project(kCam, T_cw * P);
    CHECK(point_residual(pixel, T_cw, P, kCam).norm() < 1e-12);
    const Vec2 shifted = pixel + Vec2(3.0, -4.0);
    CHECK(max_abs_diff(point_residual(shifted, T_cw, P, kCam), Vec2(-3.0, 4.0)) <
          1e-12);
  }
}

TEST_CASE("point_jacobians match central differences") {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 T_wc = random_pose(rng);
    const PoseSE3 T_cw = T_wc.inverse();
    const Vec3 P = visible_world_point(rng, T_cw);
    const Vec2 pixel = project(kCam, T_cw * P) + Vec2(1.5, -2.5);

    Mat26 J_pose;
    Mat23 J_point;
    point_jacobians(T_cw, P, kCam, &J_pose, &J_point);

    const Mat26 J_pose_fd = fd_jacobian<2, 6>([&](const Vec6& xi) -> Vec2 {
      return point_residual(pixel, se3_retract(T_wc, xi).inverse(), P, kCam);
    });
    const Mat23 J_point_fd = fd_jacobian<2, 3>([&](const Vec3& dp) -> Vec2 {
      return point_residual(pixel, T_cw, P + dp, kCam);
    });
    CHECK(jacobian_close(J_pose, J_pose_fd));
    CHECK(jacobian_close(J_point, J_point_fd));
  }
}

TEST_CASE("line_projection_matrix layout") {
  const Mat3 K = line_projection_matrix(kCam);
  Mat3 expect;
  expect << 535.0, 0, 0, 0, 535.0, 0, -535.0 * 320.0, -535.0 * 240.0,
      535.0 * 535.0;
  CHECK(max_abs_diff(K, expect) == 0.0);
}

TEST_CASE("transform_plucker maps points on the line to points on the line") {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_vec3(rng, 3.0);
    const Vec3 b = random_vec3(rng, 3.0);
    if ((a - b).norm() < 0.1) {
      continue;
    }
    const PluckerLine L_w = plucker_from_endpoints({a, b});
    const PoseSE3 T_cw = random_pose(rng);
    const PluckerLine L_c = transform_plucker(T_cw, L_w);
    CHECK(point_line_distance(L_c, T_cw * a) < 1e-11);
    CHECK(point_line_distance(L_c, T_cw * b) < 1e-11);
    CHECK(std::abs(L_c.n.dot(L_c.d)) < 1e-11);
    // The direction rotates; the transform preserves its norm.
    CHECK(max_abs_diff(L_c.d, (T_cw.rotation() * L_w.d).eval()) < 1e-13);
  }
  // Identity transform is a no-op.
  const PluckerLine L = random_plucker(rng);
  const PluckerLine same = transform_plucker(PoseSE3(), L);
  CHECK(max_abs_diff(same.n, L.n) == 0.0);
  CHECK(max_abs_diff(same.d, L.d) == 0.0);
}

TEST_CASE("transform_plucker composes like the pose product") {
  std::mt19937_64 rng(54);
  for (int i = 0; i < 50; ++i) {
    const PluckerLine L = random_plucker(rng);
    const PoseSE3 T1 = random_pose(rng);
    const PoseSE3 T2 = random_pose(rng);
    const PluckerLine twice = transform_plucker(T2, transform_plucker(T1, L));
    const PluckerLine once = transform_plucker(T2 * T1, L);
    CHECK(max_abs_diff(twice.n, once.n) < 1e-12);
    CHECK(max_abs_diff(twice.d, once.d) < 1e-12);
  }
}

TEST_CASE("line_residual is the signed endpoint distance in pixels") {
  // The horizontal world line at y = 0, z = 2 projects to the image row
  // v = cy for an identity camera; endpoints 3 px above and below the row
  // read off as residual -3 and +3.
  const PluckerLine L = plucker_from_endpoints({Vec3(1, 0, 2), Vec3(-1, 0, 2)});
  LineObservation obs;
  obs.p_start = Vec2(100.0, 240.0 + 3.0);
  obs.p_end = Vec2(500.0, 240.0 - 3.0);
  const Vec2 r = line_residual(obs, L, PoseSE3(), kCam);
  CHECK(max_abs_diff(r, Vec2(-3.0, 3.0)) < 1e-12);

  // Invariant under positive rescaling of the Pluecker pair.
  const PluckerLine scaled{2.5 * L.n, 2.5 * L.d};
  CHECK(max_abs_diff(line_residual(obs, scaled, PoseSE3(), kCam), r) < 1e-12);

  // Exact endpoints -> zero residual.
  obs.p_start = Vec2(100.0, 240.0);
  obs.p_end = Vec2(500.0, 240.0);
  CHECK(line_residual(obs, L, PoseSE3(), kCam).norm() < 1e-12);
}

TEST_CASE("line_residual rejects lines with no image-plane normal") {
  // A line through the optical axis projects to l with l0 = l1 = 0.
  const PluckerLine L = plucker_from_endpoints({Vec3(0, 0, 1), Vec3(0, 0, 2)});
  LineObservation obs;
  obs.p_start = Vec2(10, 10);
  obs.p_end = Vec2(20, 20);
  CHECK_THROWS_AS(line_residual(obs, L, PoseSE3(), kCam),
                  DegenerateProjectionError);
}

TEST_CASE("line_jacobian_pose matches central differences") {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 T_wc = random_pose(rng);
    const PoseSE3 T_cw = T_wc.inverse();
    const PluckerLine L_w = observable_line(rng, T_cw);
    const LineObservation obs = random_segment_obs(rng);

    const Mat26 J = line_jacobian_pose(obs, L_w, T_cw, kCam);
    const Mat26 Jfd = fd_jacobian<2, 6>([&](const Vec6& xi) -> Vec2 {
      return line_residual(obs, L_w, se3_retract(T_wc, xi).inverse(), kCam);
    });
    CHECK(jacobian_close(J, Jfd));
  }
}

TEST_CASE("line_jacobian_rieman matches central differences") {
  std::mt19937_64 rng(56);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 T_wc = random_pose(rng);
    const PoseSE3 T_cw = T_wc.inverse();
    RiemanLine line = random_rieman(rng);
    if (transform_plucker(T_cw, plucker_from_rieman(line)).n.head<2>().norm() <
        0.2) {
      continue;
    }
    const LineObservation obs = random_segment_obs(rng);

    const Mat24 J = line_jacobian_rieman(obs, line, T_cw, kCam);
    const Mat24 Jfd = fd_jacobian<2, 4>([&](const Vec4& h) -> Vec2 {
      RiemanTangent t;
      t.delta_theta = h.head<2>();
      t.delta_gamma = h[2];
      t.delta_scale = h[3];
      return line_residual(obs, plucker_from_rieman(rieman_retract(line, t)),
                           T_cw, kCam);
    });
    CHECK(jacobian_close(J, Jfd));
  }
}

TEST_CASE("line_jacobian_rieman scale column dies when the camera sits on the origin") {
  // With a zero camera translation the moment is homogeneous in the scale,
  // so the residual cannot depend on it.
  std::mt19937_64 rng(57);
  for (int i = 0; i < 50; ++i) {
    const PoseSE3 T_cw(random_rotation(rng), Vec3::Zero());
    RiemanLine line = random_rieman(rng);
    if (transform_plucker(T_cw, plucker_from_rieman(line)).n.head<2>().norm() <
        0.2) {
      continue;
    }
    const LineObservation obs = random_segment_obs(rng);
    const Mat24 J = line_jacobian_rieman(obs, line, T_cw, kCam);
    CHECK(J.col(3).norm() < 1e-10);
  }
}

TEST_CASE("shared-direction member Jacobian equals the single-line Jacobian") {
  // The group form passes direction, basis, normal and scale separately;
  // fed with a single line's own pieces it must reproduce the 4-column
  // Jacobian exactly.
  std::mt19937_64 rng(58);
  for (int i = 0; i < 50; ++i) {
    const PoseSE3 T_cw = random_pose(rng).inverse();
    const RiemanLine line = random_rieman(rng);
    if (transform_plucker(T_cw, plucker_from_rieman(line)).n.head<2>().norm() <
        0.2) {
      continue;
    }
    const LineObservation obs = random_segment_obs(rng);
    const Mat24 a = line_jacobian_rieman(obs, line, T_cw, kCam);
    const Mat24 b =
        line_jacobian_rieman(obs, line.direction(), tangent_basis(line.direction()),
                             line.normal(), line.scale(), T_cw, kCam);
    CHECK(max_abs_diff(a, b) == 0.0);
  }
}

TEST_CASE("line_jacobian_orthonormal matches central differences") {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 T_cw = random_pose(rng).inverse();
    const PluckerLine L_w = observable_line(rng, T_cw);
    const OrthonormalLine o = orthonormal_from_plucker(L_w);
    const LineObservation obs = random_segment_obs(rng);

    const Mat24 J = line_jacobian_orthonormal(obs, o, T_cw, kCam);
    const Mat24 Jfd = fd_jacobian<2, 4>([&](const Vec4& h) -> Vec2 {
      const OrthonormalLine stepped = orthonormal_retract(o, h.head<3>(), h[3]);
      return line_residual(obs, plucker_from_orthonormal(stepped), T_cw, kCam);
    });
    CHECK(jacobian_close(J, Jfd));
  }
}

TEST_CASE("parallel_residual measures mean direction misalignment") {
  const UnitVector3 ez(Vec3::UnitZ());
  std::vector<UnitVector3> dirs{ez, ez, ez};
  CHECK(parallel_residual(dirs, 0) == 0.0);
  CHECK(parallel_residual(dirs, 2) == 0.0);

  // One member tilted by angle a against the others: r for an aligned
  // member is (1 - cos a) / 2 with N = 3.
  const double a = 0.2;
  dirs[2] = UnitVector3(Vec3(std::sin(a), 0.0, std::cos(a)));
  CHECK(parallel_residual(dirs, 0) ==
        doctest::Approx(0.5 * (1.0 - std::cos(a))).epsilon(1e-14));
  // The tilted member sees the full misalignment against both.
  CHECK(parallel_residual(dirs, 2) ==
        doctest::Approx(1.0 - std::cos(a)).epsilon(1e-14));
  CHECK(parallel_residual(dirs, 2) > 0.0);

  CHECK_THROWS_AS(parallel_residual({ez}, 0), std::invalid_argument);
  CHECK_THROWS_AS(parallel_residual(dirs, 3), std::invalid_argument);
}

TEST_CASE("parallel_jacobian matches central differences") {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    std::vector<UnitVector3> dirs;
    for (int i = 0; i < n; ++i) {
      dirs.push_back(random_unit(rng));
    }
    const int center = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const auto J = parallel_jacobian(dirs, center);
    REQUIRE(static_cast<int>(J.size()) == n);
    for (int m = 0; m < n; ++m) {
      const Eigen::RowVector3d Jfd =
          fd_jacobian<1, 3>([&](const Vec3& h) -> Eigen::Matrix<double, 1, 1> {
            // The residual is algebraic in the raw vectors; perturb directly.
            std::vector<UnitVector3> d2 = dirs;
            Vec3 moved = dirs[m].vec() + h;
            d2[m] = UnitVector3(moved.normalized());
            // Undo the normalization so the FD probes the raw dependence.
            double r = 0.0;
            for (std::size_t j = 0; j < d2.size(); ++j) {
              if (static_cast<int>(j) == center) {
                continue;
              }
              const Vec3 di = (center == m) ? moved : dirs[center].vec();
              const Vec3 dj = (static_cast<int>(j) == m) ? moved : dirs[j].vec();
              r += 1.0 - di.dot(dj);
            }
            return Eigen::Matrix<double, 1, 1>(
                r / static_cast<double>(d2.size() - 1));
          });
      CHECK((J[m] - Jfd).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("robust_weight values and monotonicity") {
  const RobustLoss none{LossKind::None, 1.0};
  CHECK(robust_weight(none, 7.25) == std::pair<double, double>(7.25, 1.0));

  const double c = 2.5;
  const RobustLoss cauchy{LossKind::Cauchy, c};
  // At s = c^2 the Cauchy loss reads c^2 log 2 with weight 1/2.
  const auto [rho, drho] = robust_weight(cauchy, c * c);
  CHECK(rho == doctest::Approx(c * c * std::log(2.0)).epsilon(1e-15));
  CHECK(drho == doctest::Approx(0.5).epsilon(1e-15));
  // Near zero the loss is the identity.
  const auto small = robust_weight(cauchy, 1e-9);
  CHECK(small.first == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK(small.second == doctest::Approx(1.0).epsilon(1e-6));

  double prev_rho = -1.0, prev_w = 2.0;
  for (double s = 0.0; s < 100.0; s += 0.5) {
    const auto [r, w] = robust_weight(cauchy, s);
    CHECK(r >= prev_rho);
    CHECK(w <= prev_w);
    CHECK(w > 0.0);
    // drho really is the derivative of rho.
    const double fd = (robust_weight(cauchy, s + 1e-6).first -
                       robust_weight(cauchy, std::max(0.0, s - 1e-6)).first) /
                      (s > 1e-6 ? 2e-6 : 1e-6);
    CHECK(w == doctest::Approx(fd).epsilon(1e-4));
    prev_rho = r;
    prev_w = w;
  }
  CHECK_THROWS_AS(robust_weight(cauchy, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(robust_weight(RobustLoss{LossKind::Cauchy, 0.0}, 1.0),
                  std::invalid_argument);
}
