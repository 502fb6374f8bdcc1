#pragma once

#include "rieman/graph.hpp"

#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace rieman {

// Block composition of the optimization problem:
//   Point                  poses + points, pixel factors only
//   Point_OrthLine         + one 4-DoF orthonormal block per line
//   Point_OrthLine_Constr  + explicit parallelism factors inside groups
//   Point_RiemanLine       + one 4-DoF minimal block per line, groups ignored
//   Point_StructRiemanLine grouped lines share one direction (2+2k blocks)
enum class Method {
  Point,
  PointOrthLine,
  PointOrthLineConstr,
  PointRiemanLine,
  PointStructRiemanLine,
};

std::string method_name(Method method);
Method method_from_name(const std::string& name);  // throws ValidationError
const std::vector<Method>& all_methods();

struct SolveConfig {
  Method method = Method::PointStructRiemanLine;
  int max_iterations = 20;
  double damping_initial = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.5;
  double rel_decrease_tol = 1e-8;
  double step_norm_tol = 1e-12;
  RobustLoss loss{LossKind::Cauchy, 1.0};
};

// Evolving block values; topology lives in Problem.
struct ProblemState {
  std::vector<PoseSE3> poses;
  std::vector<Vec3> points;
  std::vector<OrthonormalLine> orth_lines;
  std::vector<RiemanLine> rieman_lines;
  std::vector<ParallelGroup> groups;
};

class Problem {
 public:
  struct Block {
    int col = -1;  // first tangent column; -1 while fixed
    int dim = 0;
    bool fixed = false;
  };

  enum class LineTarget { Orth, Rieman, GroupMember };

  struct PointFactor {
    int pose = 0;
    int point = 0;
    Vec2 pixel = Vec2::Zero();
  };

  struct LineFactor {
    int pose = 0;
    LineTarget target = LineTarget::Orth;
    int block = 0;
    int member = 0;  // index within a group block
    LineObservation obs;
  };

  // One residual per member line of a group (the centered index).
  struct ParallelFactor {
    std::vector<int> blocks;  // orthonormal block indices of the group
    int center = 0;
  };

  Method method = Method::Point;
  CameraIntrinsics intrinsics;

  std::vector<Block> pose_blocks, point_blocks, orth_blocks, rieman_blocks,
      group_blocks;
  std::vector<Id> pose_ids, point_ids, orth_ids, rieman_ids, group_ids;
  std::vector<std::vector<Id>> group_member_ids;

  std::vector<PointFactor> point_factors;
  std::vector<LineFactor> line_factors;
  std::vector<ParallelFactor> parallel_factors;

  ProblemState initial;

  GraphCensus census;
  std::int64_t residual_blocks = 0;
  std::int64_t residual_scalars = 0;
  std::int64_t pruned_points = 0;
  std::int64_t pruned_lines = 0;

  int num_cols = 0;

  std::int64_t num_factors() const {
    return static_cast<std::int64_t>(point_factors.size() +
                                     line_factors.size() +
                                     parallel_factors.size());
  }

  // Recomputes column offsets from the fixed flags.
  void rebuild_columns();
};

// Validates, prunes landmarks seen from fewer than 3 poses (dissolving
// groups that fall below 2 members), maps vertices to blocks for the
// method, and fixes the lowest-id pose as the gauge. Throws
// ValidationError / ThroughOriginError.
Problem assemble(const FactorGraph& graph, const SolveConfig& config);

struct Linearization {
  double cost = 0.0;
  Eigen::SparseMatrix<double> H;  // 2 sum rho' J^T J over active factors
  VecX g;                         // 2 sum rho' J^T r
  std::int64_t deactivated = 0;
};

Linearization linearize(const Problem& problem, const ProblemState& state,
                        const RobustLoss& loss);

double evaluate_cost(const Problem& problem, const ProblemState& state,
                     const RobustLoss& loss,
                     std::int64_t* deactivated = nullptr);

ProblemState retract_state(const Problem& problem, const ProblemState& state,
                           const VecX& delta);

enum class Termination {
  RelativeDecrease,
  StepNorm,
  MaxIterations,
  NoFactors,
  AllFixed,
};

std::string termination_name(Termination t);

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  bool accepted = false;
  double damping = 0.0;
};

struct SolveReport {
  std::vector<IterationRecord> trace;  // row 0 carries the initial cost
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // attempted steps
  int accepted_steps = 0;
  Termination termination = Termination::MaxIterations;
  double seconds = 0.0;
  std::int64_t deactivated_final = 0;
  ProblemState state;
};

// Levenberg-Marquardt with multiplicative damping on the Hessian diagonal
// and a sparse Cholesky (LDLT) solve of the damped normal equations.
SolveReport lm_solve(const Problem& problem, const SolveConfig& config);

// Copies final block values back into the graph's vertex records. Grouped
// lines receive the bit-identical shared direction.
void write_back(const Problem& problem, const ProblemState& state,
                FactorGraph* graph);

}  // namespace rieman
