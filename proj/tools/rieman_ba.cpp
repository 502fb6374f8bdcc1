#include "rieman/graph_io.hpp"
#include "rieman/metrics.hpp"
#include "rieman/scene_synth.hpp"
#include "rieman/solver.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace rieman;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw ValidationError("failed writing '" + path + "'");
  }
}

// foo/bar.csv -> foo/bar<suffix> (suffix carries its own extension).
std::string sibling(const std::string& path, const std::string& suffix) {
  const std::size_t slash = path.find_last_of("/\\");
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + suffix;
  }
  return path.substr(0, dot) + suffix;
}

std::string trace_csv(const SolveReport& report) {
  std::string csv = "iteration,cost,accepted,damping\n";
  for (const IterationRecord& it : report.trace) {
    csv += std::to_string(it.iteration) + "," + fmt(it.cost) + "," +
           (it.accepted ? "1" : "0") + "," + fmt(it.damping) + "\n";
  }
  return csv;
}

void print_report(const SolveReport& report, Method method) {
  std::cout << "method " << method_name(method) << "\n"
            << "initial_cost " << fmt(report.initial_cost) << "\n"
            << "final_cost " << fmt(report.final_cost) << "\n"
            << "iterations " << report.iterations << "\n"
            << "accepted_steps " << report.accepted_steps << "\n"
            << "termination " << termination_name(report.termination) << "\n"
            << "deactivated_factors " << report.deactivated_final << "\n"
            << "seconds " << fmt(report.seconds) << "\n";
}

// Ground truth of a graph file: its GT records when present, otherwise its
// vertex records (so a pristine generated file can serve as truth).
void truth_records(const FactorGraph& g, std::vector<PoseRecord>* poses,
                   std::vector<LineRecord>* lines) {
  if (g.has_ground_truth()) {
    *poses = g.gt_poses;
    *lines = g.gt_lines;
  } else {
    *poses = g.poses;
    *lines = g.lines;
  }
}

int cmd_generate(const std::string& spec_path, const std::string& out_path) {
  RunConfig cfg;
  if (!spec_path.empty()) {
    cfg = read_config_file(spec_path);
  }
  const FactorGraph graph = generate_scene(cfg.scene);
  write_graph_file(graph, out_path);
  std::cout << "archetype " << archetype_name(cfg.scene.archetype) << "\n"
            << "poses " << graph.poses.size() << "\n"
            << "points " << graph.points.size() << "\n"
            << "lines " << graph.lines.size() << "\n"
            << "groups " << graph.groups.size() << "\n"
            << "point_observations " << graph.point_observations.size() << "\n"
            << "line_observations " << graph.line_observations.size() << "\n";
  return 0;
}

int cmd_optimize(const std::string& graph_path, const std::string& config_path,
                 const std::string& out_path, const std::string& trace_path) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = read_config_file(config_path);
  }
  FactorGraph graph = read_graph_file(graph_path);
  const Problem problem = assemble(graph, cfg.solve);
  const SolveReport report = lm_solve(problem, cfg.solve);
  write_back(problem, report.state, &graph);
  if (!out_path.empty()) {
    write_graph_file(graph, out_path);
  }
  if (!trace_path.empty()) {
    write_text(trace_path, trace_csv(report));
  }
  print_report(report, cfg.solve.method);
  return 0;
}

int cmd_evaluate(const std::string& estimate_path, const std::string& gt_path,
                 const std::string& out_path) {
  const FactorGraph est = read_graph_file(estimate_path);
  const FactorGraph gtg = read_graph_file(gt_path);
  std::vector<PoseRecord> gt_poses;
  std::vector<LineRecord> gt_lines;
  truth_records(gtg, &gt_poses, &gt_lines);

  const TrajectoryMetrics tm = trajectory_metrics(est.poses, gt_poses);
  const LineMetrics lm = line_metrics(est.lines, gt_lines);

  std::string csv = "metric,value\n";
  csv += "n_poses," + std::to_string(tm.n) + "\n";
  csv += "ate_rmse_m," + fmt(tm.ate_rmse) + "\n";
  csv += "ate_median_m," + fmt(tm.ate_median) + "\n";
  csv += "rot_rmse_deg," + fmt(tm.rot_rmse_deg) + "\n";
  csv += "rot_median_deg," + fmt(tm.rot_median_deg) + "\n";
  csv += "lines_matched," + std::to_string(lm.matched) + "\n";
  csv += "lines_excluded," + std::to_string(lm.excluded) + "\n";
  csv += "dir_mean_deg," + fmt(lm.direction.mean) + "\n";
  csv += "dir_median_deg," + fmt(lm.direction.median) + "\n";
  csv += "dir_std_deg," + fmt(lm.direction.stddev) + "\n";
  csv += "dir_rmse_deg," + fmt(lm.direction.rmse) + "\n";
  csv += "normal_mean_deg," + fmt(lm.normal.mean) + "\n";
  csv += "normal_median_deg," + fmt(lm.normal.median) + "\n";
  csv += "normal_std_deg," + fmt(lm.normal.stddev) + "\n";
  csv += "normal_rmse_deg," + fmt(lm.normal.rmse) + "\n";
  write_text(out_path, csv);

  std::string lines_csv = "line_id,direction_error_deg,normal_error_deg\n";
  for (std::size_t i = 0; i < lm.direction_errors_deg.size(); ++i) {
    lines_csv += std::to_string(lm.direction_errors_deg[i].first) + "," +
                 fmt(lm.direction_errors_deg[i].second) + "," +
                 fmt(lm.normal_errors_deg[i].second) + "\n";
  }
  write_text(sibling(out_path, "_lines.csv"), lines_csv);

  const auto write_cdf = [&](const std::vector<std::pair<Id, double>>& errors,
                             const std::string& path) {
    std::vector<double> vals;
    for (const auto& [id, e] : errors) {
      vals.push_back(e);
    }
    std::string cdf_csv = "error_deg,cumulative_fraction\n";
    for (const auto& [e, f] : error_cdf(std::move(vals))) {
      cdf_csv += fmt(e) + "," + fmt(f) + "\n";
    }
    write_text(path, cdf_csv);
  };
  write_cdf(lm.direction_errors_deg, sibling(out_path, "_direction_cdf.csv"));
  write_cdf(lm.normal_errors_deg, sibling(out_path, "_normal_cdf.csv"));

  std::cout << "ate_rmse_m " << fmt(tm.ate_rmse) << "\n"
            << "rot_rmse_deg " << fmt(tm.rot_rmse_deg) << "\n"
            << "dir_median_deg " << fmt(lm.direction.median) << "\n"
            << "normal_median_deg " << fmt(lm.normal.median) << "\n";
  return 0;
}

int cmd_compare(const std::string& graph_path, const std::string& methods_arg,
                const std::string& config_path, const std::string& out_path) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = read_config_file(config_path);
  }
  const FactorGraph graph = read_graph_file(graph_path);
  if (!graph.has_ground_truth()) {
    throw ValidationError("compare needs ground-truth records in the graph");
  }

  std::vector<Method> methods;
  if (methods_arg.empty()) {
    methods = all_methods();
  } else {
    std::stringstream ss(methods_arg);
    std::string name;
    while (std::getline(ss, name, ',')) {
      methods.push_back(method_from_name(name));
    }
  }

  std::string csv =
      "method,iterations,accepted_steps,final_cost,ate_rmse_m,ate_median_m,"
      "rot_rmse_deg,rot_median_deg,dir_median_deg,normal_median_deg\n";
  std::string report_txt;
  for (const Method method : methods) {
    SolveConfig solve = cfg.solve;
    solve.method = method;
    FactorGraph out = graph;
    const Problem problem = assemble(out, solve);
    const SolveReport report = lm_solve(problem, solve);
    write_back(problem, report.state, &out);
    const TrajectoryMetrics tm = trajectory_metrics(out.poses, graph.gt_poses);
    const LineMetrics lm = line_metrics(out.lines, graph.gt_lines);
    csv += method_name(method) + "," + std::to_string(report.iterations) +
           "," + std::to_string(report.accepted_steps) + "," +
           fmt(report.final_cost) + "," + fmt(tm.ate_rmse) + "," +
           fmt(tm.ate_median) + "," + fmt(tm.rot_rmse_deg) + "," +
           fmt(tm.rot_median_deg) + "," + fmt(lm.direction.median) + "," +
           fmt(lm.normal.median) + "\n";
    report_txt += method_name(method) + " seconds " + fmt(report.seconds) +
                  " termination " + termination_name(report.termination) +
                  "\n";
  }
  write_text(out_path, csv);
  write_text(sibling(out_path, ".report.txt"), report_txt);
  std::cout << csv;
  return 0;
}

int cmd_count(const std::string& graph_path, const std::string& method_name_arg) {
  const FactorGraph graph = read_graph_file(graph_path);
  SolveConfig cfg;
  cfg.method = method_from_name(method_name_arg);
  const Problem problem = assemble(graph, cfg);
  const ParameterCount pc = count_parameters(problem.census);
  std::cout << "method " << method_name(cfg.method) << "\n"
            << "parameter_blocks " << pc.blocks << "\n"
            << "effective_parameters " << pc.effective_params << "\n"
            << "residual_blocks " << problem.residual_blocks << "\n"
            << "residuals " << problem.residual_scalars << "\n"
            << "pruned_points " << problem.pruned_points << "\n"
            << "pruned_lines " << problem.pruned_lines << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bundle adjustment over points, lines and parallel-line groups"};
  app.require_subcommand(1);

  std::string spec_path, graph_path, config_path, out_path, trace_path;
  std::string estimate_path, gt_path, methods_arg, method_arg;

  CLI::App* generate = app.add_subcommand(
      "generate", "Synthesize a scene and write its factor graph");
  generate->add_option("--spec", spec_path,
                       "Scene configuration file (defaults when omitted)");
  generate->add_option("--out", out_path, "Output graph file")->required();

  CLI::App* optimize =
      app.add_subcommand("optimize", "Run the solver on a graph file");
  optimize->add_option("--graph", graph_path, "Input graph file")->required();
  optimize->add_option("--config", config_path, "Solver configuration file");
  optimize->add_option("--out", out_path, "Optimized graph output");
  optimize->add_option("--trace", trace_path, "Per-iteration cost CSV");

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Compare an estimated graph against ground truth");
  evaluate->add_option("--estimate", estimate_path, "Estimated graph file")
      ->required();
  evaluate->add_option("--gt", gt_path, "Ground-truth graph file")->required();
  evaluate->add_option("--out", out_path, "Metrics CSV output")->required();

  CLI::App* compare = app.add_subcommand(
      "compare", "Optimize one graph with several methods and tabulate");
  compare->add_option("--graph", graph_path, "Input graph file")->required();
  compare->add_option("--methods", methods_arg,
                      "Comma-separated method names (default: all)");
  compare->add_option("--config", config_path, "Solver configuration file");
  compare->add_option("--out", out_path, "Comparison CSV output")->required();

  CLI::App* count = app.add_subcommand(
      "count", "Print the parameter/residual census for a method");
  count->add_option("--graph", graph_path, "Input graph file")->required();
  count->add_option("--method", method_arg, "Method name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) {
      return cmd_generate(spec_path, out_path);
    }
    if (optimize->parsed()) {
      return cmd_optimize(graph_path, config_path, out_path, trace_path);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(estimate_path, gt_path, out_path);
    }
    if (compare->parsed()) {
      return cmd_compare(graph_path, methods_arg, config_path, out_path);
    }
    if (count->parsed()) {
      return cmd_count(graph_path, method_arg);
    }
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
