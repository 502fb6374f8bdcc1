#pragma once

#include "rieman/line_repr.hpp"

#include <utility>
#include <vector>

namespace rieman {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct PointObservation {
  Id pose_id = 0;
  Id point_id = 0;
  Vec2 pixel = Vec2::Zero();
};

// Observed 2D segment endpoints of a 3D line, in pixels.
struct LineObservation {
  Id pose_id = 0;
  Id line_id = 0;
  Vec2 p_start = Vec2::Zero();
  Vec2 p_end = Vec2::Zero();
};

enum class LossKind { None, Cauchy };

struct RobustLoss {
  LossKind kind = LossKind::None;
  double scale = 1.0;  // pixels
};

// Pinhole projection of a camera-frame point; depth must be positive.
Vec2 project(const CameraIntrinsics& K, const Vec3& p_cam);

// Pixel reprojection residual r = project(T_cw * P_w) - pixel.
// T_cw maps world to camera throughout this module.
Vec2 point_residual(const Vec2& pixel, const PoseSE3& T_cw, const Vec3& P_w,
                    const CameraIntrinsics& K);

// Jacobians of the point residual. The pose block is the world-from-camera
// pose perturbed on the right, tangent order (rotation | translation).
void point_jacobians(const PoseSE3& T_cw, const Vec3& P_w,
                     const CameraIntrinsics& K, Mat26* J_pose, Mat23* J_point);

// Maps a camera-frame Pluecker moment to image-line coordinates:
// [[fy, 0, 0], [0, fx, 0], [-fy cx, -fx cy, fx fy]].
Mat3 line_projection_matrix(const CameraIntrinsics& K);

// World line into the camera frame. For the endpoint construction used here
// (n = p_s x p_e, d = p_s - p_e) the moment transforms with a minus:
// n_c = R n_w - [t]x R d_w, d_c = R d_w.
PluckerLine transform_plucker(const PoseSE3& T_cw, const PluckerLine& L_w);

// Signed pixel distances of both observed endpoints to the projected line,
// normalized by the image-line normal (first two components of l).
Vec2 line_residual(const LineObservation& obs, const PluckerLine& L_w,
                   const PoseSE3& T_cw, const CameraIntrinsics& K);

// Jacobian wrt the pose block (world-from-camera, right perturbation).
Mat26 line_jacobian_pose(const LineObservation& obs, const PluckerLine& L_w,
                         const PoseSE3& T_cw, const CameraIntrinsics& K);

// Jacobian wrt the minimal line block, columns (delta_theta[2], delta_gamma,
// delta_scale). The direction, its tangent basis, normal and scale are
// passed separately so one shared direction can serve a whole group.
Mat24 line_jacobian_rieman(const LineObservation& obs, const UnitVector3& u2,
                           const TangentBasis& basis, const UnitVector3& u1,
                           double omega, const PoseSE3& T_cw,
                           const CameraIntrinsics& K);

Mat24 line_jacobian_rieman(const LineObservation& obs, const RiemanLine& r,
                           const PoseSE3& T_cw, const CameraIntrinsics& K);

// Jacobian wrt an orthonormal block, columns (rho[3], phi).
Mat24 line_jacobian_orthonormal(const LineObservation& obs,
                                const OrthonormalLine& o, const PoseSE3& T_cw,
                                const CameraIntrinsics& K);

// Mean misalignment of direction i against the rest of its group:
// r_i = (1/(N-1)) sum_{j != i} (1 - d_i . d_j).
double parallel_residual(const std::vector<UnitVector3>& directions, int i);

// d r_i / d d_m for every participating direction m (chain to the block
// tangent is the caller's job). Entry i is the center term, entries j != i
// carry -(1/(N-1)) d_i^T.
std::vector<Eigen::RowVector3d> parallel_jacobian(
    const std::vector<UnitVector3>& directions, int i);

// (rho(s), drho/ds) for squared residual norm s. None keeps (s, 1); Cauchy
// gives c^2 log(1 + s/c^2) with weight 1/(1 + s/c^2).
std::pair<double, double> robust_weight(const RobustLoss& loss, double s);

}  // namespace rieman
