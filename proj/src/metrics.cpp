#include "rieman/metrics.hpp"

#include "rieman/manifold.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>

namespace rieman {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) {
    return v[n / 2];
  }
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double rmse_of(const std::vector<double>& v) {
  if (v.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (const double e : v) {
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(v.size()));
}

ErrorSummary summarize(const std::vector<double>& v) {
  ErrorSummary s;
  if (v.empty()) {
    return s;
  }
  double sum = 0.0;
  for (const double e : v) {
    sum += e;
  }
  s.mean = sum / static_cast<double>(v.size());
  double var = 0.0;
  for (const double e : v) {
    var += (e - s.mean) * (e - s.mean);
  }
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  s.median = median_of(v);
  s.rmse = rmse_of(v);
  return s;
}

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

double unsigned_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())),
                              0.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

}  // namespace

Alignment align_trajectories(const std::vector<Vec3>& estimated,
                             const std::vector<Vec3>& gt) {
  if (estimated.size() != gt.size()) {
    throw std::invalid_argument("align_trajectories: size mismatch");
  }
  if (estimated.size() < 3) {
    throw InsufficientDataError(
        "trajectory alignment needs at least 3 matched poses, got " +
        std::to_string(estimated.size()));
  }
  const double n = static_cast<double>(estimated.size());
  Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    mp += estimated[i];
    mq += gt[i];
  }
  mp /= n;
  mq /= n;
  Mat3 C = Mat3::Zero();
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    C += (estimated[i] - mp) * (gt[i] - mq).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  Alignment a;
  a.R = svd.matrixV() * D * svd.matrixU().transpose();
  a.t = mq - a.R * mp;
  return a;
}

TrajectoryMetrics trajectory_metrics(const std::vector<PoseRecord>& estimated,
                                     const std::vector<PoseRecord>& gt) {
  std::map<Id, const PoseRecord*> gt_by_id;
  for (const PoseRecord& p : gt) {
    gt_by_id.emplace(p.id, &p);
  }
  std::vector<const PoseRecord*> e, g;
  std::map<Id, const PoseRecord*> est_by_id;
  for (const PoseRecord& p : estimated) {
    est_by_id.emplace(p.id, &p);
  }
  for (const auto& [id, pe] : est_by_id) {
    const auto it = gt_by_id.find(id);
    if (it != gt_by_id.end()) {
      e.push_back(pe);
      g.push_back(it->second);
    }
  }

  std::vector<Vec3> pe, pg;
  for (std::size_t i = 0; i < e.size(); ++i) {
    pe.push_back(e[i]->t);
    pg.push_back(g[i]->t);
  }
  const Alignment a = align_trajectories(pe, pg);

  std::vector<double> trans, rot;
  for (std::size_t i = 0; i < e.size(); ++i) {
    trans.push_back((a.R * pe[i] + a.t - pg[i]).norm());
    const Mat3 dR = a.R * e[i]->q.toRotationMatrix() *
                    g[i]->q.toRotationMatrix().transpose();
    rot.push_back(so3_log(dR).norm() * kRadToDeg);
  }

  TrajectoryMetrics m;
  m.n = static_cast<int>(e.size());
  m.ate_rmse = rmse_of(trans);
  m.ate_median = median_of(trans);
  m.rot_rmse_deg = rmse_of(rot);
  m.rot_median_deg = median_of(rot);
  return m;
}

LineMetrics line_metrics(const std::vector<LineRecord>& estimated,
                         const std::vector<LineRecord>& gt) {
  std::map<Id, const LineRecord*> gt_by_id;
  for (const LineRecord& l : gt) {
    gt_by_id.emplace(l.id, &l);
  }
  std::map<Id, const LineRecord*> est_by_id;
  for (const LineRecord& l : estimated) {
    est_by_id.emplace(l.id, &l);
  }

  LineMetrics m;
  std::vector<double> dir_errors, normal_errors;
  for (const auto& [id, le] : est_by_id) {
    const auto it = gt_by_id.find(id);
    if (it == gt_by_id.end()) {
      continue;
    }
    const PluckerLine& a = le->line;
    const PluckerLine& b = it->second->line;
    // Distance of the line from the origin is |moment| on the unit-direction
    // normalization; a vanishing moment has no defined normal direction.
    if (a.n.norm() / a.d.norm() <= 1e-9 || b.n.norm() / b.d.norm() <= 1e-9) {
      ++m.excluded;
      continue;
    }
    ++m.matched;
    const double de = unsigned_angle_deg(a.d, b.d);
    const double ne = unsigned_angle_deg(a.n, b.n);
    m.direction_errors_deg.emplace_back(id, de);
    m.normal_errors_deg.emplace_back(id, ne);
    dir_errors.push_back(de);
    normal_errors.push_back(ne);
  }
  m.direction = summarize(dir_errors);
  m.normal = summarize(normal_errors);
  return m;
}

std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors) {
  std::sort(errors.begin(), errors.end());
  std::vector<std::pair<double, double>> cdf;
  cdf.reserve(errors.size());
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    cdf.emplace_back(errors[i], static_cast<double>(i + 1) / n);
  }
  return cdf;
}

}  // namespace rieman
