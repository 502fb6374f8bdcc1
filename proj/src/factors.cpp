#include "rieman/factors.hpp"

#include <cmath>

namespace rieman {

namespace {

// Image line l = K_line * n_c and the residual/Jacobian of the two signed
// endpoint distances wrt l. Shared by all line-factor Jacobians.
struct ImageLine {
  Vec3 l;
  Vec2 r;
  Mat23 dr_dl;
};

ImageLine image_line(const LineObservation& obs, const Vec3& n_c,
                     const CameraIntrinsics& K) {
  ImageLine out;
  out.l = line_projection_matrix(K) * n_c;
  const double s2 = out.l.x() * out.l.x() + out.l.y() * out.l.y();
  const double s = std::sqrt(s2);
  if (s <= 1e-12) {
    throw DegenerateProjectionError("projected line has no image-plane normal");
  }
  const Vec3 ps(obs.p_start.x(), obs.p_start.y(), 1.0);
  const Vec3 pe(obs.p_end.x(), obs.p_end.y(), 1.0);
  out.r << ps.dot(out.l) / s, pe.dot(out.l) / s;
  const Vec3 dn(out.l.x(), out.l.y(), 0.0);
  out.dr_dl.row(0) = ps.transpose() / s - (ps.dot(out.l) / (s2 * s)) * dn.transpose();
  out.dr_dl.row(1) = pe.transpose() / s - (pe.dot(out.l) / (s2 * s)) * dn.transpose();
  return out;
}

}  // namespace

Vec2 project(const CameraIntrinsics& K, const Vec3& p_cam) {
  if (p_cam.z() <= 0.0) {
    throw BehindCameraError("nonpositive depth");
  }
  return Vec2(K.fx * p_cam.x() / p_cam.z() + K.cx,
              K.fy * p_cam.y() / p_cam.z() + K.cy);
}

Vec2 point_residual(const Vec2& pixel, const PoseSE3& T_cw, const Vec3& P_w,
                    const CameraIntrinsics& K) {
  return project(K, T_cw * P_w) - pixel;
}

void point_jacobians(const PoseSE3& T_cw, const Vec3& P_w,
                     const CameraIntrinsics& K, Mat26* J_pose, Mat23* J_point) {
  const Vec3 p = T_cw * P_w;
  if (p.z() <= 0.0) {
    throw BehindCameraError("nonpositive depth");
  }
  const double iz = 1.0 / p.z();
  Mat23 dpi;
  dpi << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz, 0.0, K.fy * iz,
      -K.fy * p.y() * iz * iz;
  if (J_pose != nullptr) {
    // Right perturbation of T_wc: p_cam(xi) = Exp(-xi) acting on p, so
    // d p_cam = [p]x dw - dv.
    J_pose->leftCols<3>() = dpi * skew(p);
    J_pose->rightCols<3>() = -dpi;
  }
  if (J_point != nullptr) {
    *J_point = dpi * T_cw.rotation();
  }
}

Mat3 line_projection_matrix(const CameraIntrinsics& K) {
  Mat3 P;
  P << K.fy, 0.0, 0.0, 0.0, K.fx, 0.0, -K.fy * K.cx, -K.fx * K.cy, K.fx * K.fy;
  return P;
}

PluckerLine transform_plucker(const PoseSE3& T_cw, const PluckerLine& L_w) {
  const Mat3& R = T_cw.rotation();
  const Vec3& t = T_cw.translation();
  const Vec3 d_c = R * L_w.d;
  return PluckerLine{R * L_w.n - t.cross(d_c), d_c};
}

Vec2 line_residual(const LineObservation& obs, const PluckerLine& L_w,
                   const PoseSE3& T_cw, const CameraIntrinsics& K) {
  return image_line(obs, transform_plucker(T_cw, L_w).n, K).r;
}

Mat26 line_jacobian_pose(const LineObservation& obs, const PluckerLine& L_w,
                         const PoseSE3& T_cw, const CameraIntrinsics& K) {
  const PluckerLine L_c = transform_plucker(T_cw, L_w);
  const ImageLine im = image_line(obs, L_c.n, K);
  // Right perturbation of T_wc: d n_c = [n_c]x dw - [d_c]x dv.
  Mat36 dn;
  dn.leftCols<3>() = skew(L_c.n);
  dn.rightCols<3>() = -skew(L_c.d);
  return im.dr_dl * line_projection_matrix(K) * dn;
}

Mat24 line_jacobian_rieman(const LineObservation& obs, const UnitVector3& u2,
                           const TangentBasis& basis, const UnitVector3& u1,
                           double omega, const PoseSE3& T_cw,
                           const CameraIntrinsics& K) {
  const Mat3& R = T_cw.rotation();
  const Vec3& t = T_cw.translation();
  const PluckerLine L_w{omega * u1.vec(), u2.vec()};
  const ImageLine im = image_line(obs, transform_plucker(T_cw, L_w).n, K);

  Mat32 B;
  B.col(0) = basis.b_x.vec();
  B.col(1) = basis.b_y.vec();
  const Eigen::RowVector2d u1B = u1.vec().transpose() * B;
  const Vec3 u3 = u2.vec().cross(u1.vec());

  // d n_c for each tangent direction; the direction update drags the
  // re-orthogonalized normal along (-u2 u1^T B) and moves d_w by B.
  Eigen::Matrix<double, 3, 4> dn;
  const Mat32 RB = R * B;
  dn.col(0) = -omega * (R * u2.vec()) * u1B(0) - t.cross(RB.col(0));
  dn.col(1) = -omega * (R * u2.vec()) * u1B(1) - t.cross(RB.col(1));
  dn.col(2) = omega * (R * u3);
  dn.col(3) = omega * (R * u1.vec());
  return im.dr_dl * line_projection_matrix(K) * dn;
}

Mat24 line_jacobian_rieman(const LineObservation& obs, const RiemanLine& r,
                           const PoseSE3& T_cw, const CameraIntrinsics& K) {
  return line_jacobian_rieman(obs, r.direction(), tangent_basis(r.direction()),
                              r.normal(), r.scale(), T_cw, K);
}

Mat24 line_jacobian_orthonormal(const LineObservation& obs,
                                const OrthonormalLine& o, const PoseSE3& T_cw,
                                const CameraIntrinsics& K) {
  const Mat3& R = T_cw.rotation();
  const Vec3& t = T_cw.translation();
  const PluckerLine L_w = plucker_from_orthonormal(o);
  const ImageLine im = image_line(obs, transform_plucker(T_cw, L_w).n, K);

  const double w1 = o.W(0, 0);
  const double w2 = o.W(1, 0);
  // d(U Exp(rho) e_k)/d rho = -U [e_k]x at rho = 0.
  const Mat3 dn_drho_w = -w1 * o.U * skew(Vec3::UnitX());
  const Mat3 dd_drho_w = -w2 * o.U * skew(Vec3::UnitY());
  Eigen::Matrix<double, 3, 4> dn;
  for (int k = 0; k < 3; ++k) {
    const Vec3 dd = R * dd_drho_w.col(k);
    dn.col(k) = R * dn_drho_w.col(k) - t.cross(dd);
  }
  const Vec3 dd_phi = R * (w1 * o.U.col(1));
  dn.col(3) = R * (-w2 * o.U.col(0)) - t.cross(dd_phi);
  return im.dr_dl * line_projection_matrix(K) * dn;
}

double parallel_residual(const std::vector<UnitVector3>& directions, int i) {
  const int n = static_cast<int>(directions.size());
  if (n < 2) {
    throw std::invalid_argument("parallel_residual: needs at least two lines");
  }
  if (i < 0 || i >= n) {
    throw std::invalid_argument("parallel_residual: index out of range");
  }
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    sum += 1.0 - directions[i].dot(directions[j]);
  }
  return sum / (n - 1);
}

std::vector<Eigen::RowVector3d> parallel_jacobian(
    const std::vector<UnitVector3>& directions, int i) {
  const int n = static_cast<int>(directions.size());
  if (n < 2) {
    throw std::invalid_argument("parallel_jacobian: needs at least two lines");
  }
  if (i < 0 || i >= n) {
    throw std::invalid_argument("parallel_jacobian: index out of range");
  }
  const double inv = 1.0 / (n - 1);
  std::vector<Eigen::RowVector3d> J(n, Eigen::RowVector3d::Zero());
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    J[i] -= inv * directions[j].vec().transpose();
    J[j] = -inv * directions[i].vec().transpose();
  }
  return J;
}

std::pair<double, double> robust_weight(const RobustLoss& loss, double s) {
  if (s < 0.0) {
    throw std::invalid_argument("robust_weight: squared norm must be >= 0");
  }
  switch (loss.kind) {
    case LossKind::None:
      return {s, 1.0};
    case LossKind::Cauchy: {
      if (!(loss.scale > 0.0)) {
        throw std::invalid_argument("robust_weight: loss scale must be positive");
      }
      const double c2 = loss.scale * loss.scale;
      return {c2 * std::log1p(s / c2), 1.0 / (1.0 + s / c2)};
    }
  }
  throw std::invalid_argument("robust_weight: unknown loss kind");
}

}  // namespace rieman
