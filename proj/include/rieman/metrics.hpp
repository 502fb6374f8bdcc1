#pragma once

#include "rieman/graph.hpp"

#include <utility>
#include <vector>

namespace rieman {

// Rigid map taking estimated positions onto ground truth: p -> R p + t.
struct Alignment {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

// Closed-form least-squares alignment (no scale) of two matched position
// sets. Throws InsufficientDataError for fewer than 3 pairs.
Alignment align_trajectories(const std::vector<Vec3>& estimated,
                             const std::vector<Vec3>& gt);

struct TrajectoryMetrics {
  double ate_rmse = 0.0;    // meters, after rigid alignment
  double ate_median = 0.0;  // meters
  double rot_rmse_deg = 0.0;
  double rot_median_deg = 0.0;
  int n = 0;
};

// Matches poses by id (ids present on both sides), aligns the estimated
// camera centers onto ground truth, then reports translation errors and
// geodesic rotation angles of R_align * R_est * R_gt^T.
TrajectoryMetrics trajectory_metrics(const std::vector<PoseRecord>& estimated,
                                     const std::vector<PoseRecord>& gt);

struct ErrorSummary {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population standard deviation
  double rmse = 0.0;
};

struct LineMetrics {
  // Per matched line, ascending id. Angles in degrees, in [0, 90].
  std::vector<std::pair<Id, double>> direction_errors_deg;
  std::vector<std::pair<Id, double>> normal_errors_deg;
  ErrorSummary direction;
  ErrorSummary normal;
  int matched = 0;
  int excluded = 0;  // lines through the origin on either side
};

// Matches lines by id. Direction error = arccos(|d_est . d_gt|) on unit
// directions; normal error is the same construction on the unit moments.
LineMetrics line_metrics(const std::vector<LineRecord>& estimated,
                         const std::vector<LineRecord>& gt);

// Sorted (error, cumulative fraction) pairs; the last fraction is 1.
std::vector<std::pair<double, double>> error_cdf(std::vector<double> errors);

}  // namespace rieman
