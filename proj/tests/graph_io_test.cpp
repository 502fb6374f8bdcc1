#include "rieman/graph_io.hpp"

#include "doctest.h"
#include "rieman/scene_synth.hpp"
#include "test_support.hpp"

#include <cstdio>
#include <filesystem>
#include <string>

using namespace rieman;
using namespace rieman::test;

namespace {

const char* kHeader =
    "FORMAT rieman-graph 1\n"
    "CAMERA 535 535 320 240 640 480\n";

std::string with_header(const std::string& body) { return kHeader + body; }

void check_parse_error(const std::string& text, int line, int col,
                       const std::string& fragment) {
  try {
    read_graph(text);
    FAIL("expected ParseError for: " << fragment);
  } catch (const ParseError& e) {
    CHECK(e.line() == line);
    CHECK(e.column() == col);
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

void check_config_error(const std::string& text, int line, int col,
                        const std::string& fragment) {
  try {
    read_config(text);
    FAIL("expected ParseError for: " << fragment);
  } catch (const ParseError& e) {
    CHECK(e.line() == line);
    CHECK(e.column() == col);
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

FactorGraph sample_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.archetype = SceneArchetype::Sphere;
  spec.seed = seed;
  spec.n_poses = 6;
  spec.n_points = 15;
  spec.n_lines = 5;
  spec.n_groups = 1;
  return generate_scene(spec);
}

}  // namespace

TEST_CASE("write then read reproduces the graph byte for byte") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const FactorGraph g = sample_scene(seed);
    const std::string text = write_graph(g);
    const FactorGraph back = read_graph(text);
    CHECK(write_graph(back) == text);
    // Values survive the decimal round trip bitwise.
    CHECK(back.poses.size() == g.poses.size());
    for (std::size_t i = 0; i < g.poses.size(); ++i) {
      CHECK(back.poses[i].q.w() == g.poses[i].q.w());
      CHECK(back.poses[i].q.x() == g.poses[i].q.x());
      CHECK(back.poses[i].t == g.poses[i].t);
    }
    for (std::size_t i = 0; i < g.lines.size(); ++i) {
      CHECK(back.lines[i].line.n == g.lines[i].line.n);
      CHECK(back.lines[i].line.d == g.lines[i].line.d);
    }
    for (std::size_t i = 0; i < g.point_observations.size(); ++i) {
      CHECK(back.point_observations[i].pixel == g.point_observations[i].pixel);
    }
  }
}

TEST_CASE("awkward doubles survive the round trip bitwise") {
  FactorGraph g;
  g.intrinsics = CameraIntrinsics{535.0, 535.5, 320.25, 240.125};
  g.image_width = 640;
  g.image_height = 480;
  PoseRecord p;
  p.id = 0;
  p.t = Vec3(0.1, 1.0 / 3.0, -1e-15);
  g.poses.push_back(p);
  g.points.push_back({4, Vec3(1e300, 2.2250738585072014e-308, -0.0)});
  const std::string text = write_graph(g);
  const FactorGraph back = read_graph(text);
  CHECK(back.poses[0].t.x() == 0.1);
  CHECK(back.poses[0].t.y() == 1.0 / 3.0);
  CHECK(back.poses[0].t.z() == -1e-15);
  CHECK(back.points[0].p.x() == 1e300);
  CHECK(back.points[0].p.y() == 2.2250738585072014e-308);
  CHECK(write_graph(back) == text);
  // Shortest representation: 0.1 is written as the literal 0.1.
  CHECK(text.find("0.1 ") != std::string::npos);
}

TEST_CASE("record order, comments and blank lines are free on input") {
  const std::string scrambled =
      "FORMAT rieman-graph 1\n"
      "# a trailing comment line\n"
      "EDGE_POINT 7 5 10 20\n"
      "\n"
      "VERTEX_POINT 5 1 2 3\n"
      "GT_POINT 5 1 2 3\n"
      "CAMERA 535 535 320 240 640 480\n"
      "VERTEX_POSE 7 1 0 0 0 0 0 0\n"
      "VERTEX_POSE 3 0.70710678118654752 0.70710678118654752 0 0 1 2 3\n"
      "EDGE_POINT 3 5 11 21\n";
  const FactorGraph g = read_graph(scrambled);
  CHECK(g.poses.size() == 2);
  // Canonical order after parse: ids ascending.
  CHECK(g.poses[0].id == 3);
  CHECK(g.poses[1].id == 7);
  CHECK(g.point_observations[0].pose_id == 3);
  CHECK(g.point_observations[1].pose_id == 7);
  CHECK(g.gt_points.size() == 1);
  CHECK(g.has_ground_truth());

  // The canonical serialization is a fixed point of read/write.
  const std::string canon = write_graph(g);
  CHECK(write_graph(read_graph(canon)) == canon);
  // Canonical output puts FORMAT then CAMERA first.
  CHECK(canon.rfind("FORMAT rieman-graph 1\nCAMERA ", 0) == 0);
}

TEST_CASE("groups and ground truth records round-trip") {
  const std::string text = with_header(
      "VERTEX_LINE 1 0 1 0 0 0 1\n"
      "VERTEX_LINE 2 0 2 0 0 0 1\n"
      "GROUP 9 2 1\n"
      "GT_POSE 0 1 0 0 0 0 0 0\n"
      "GT_LINE 1 0 1.5 0 0 0 1\n");
  const FactorGraph g = read_graph(text);
  REQUIRE(g.groups.size() == 1);
  // Members are sorted ascending on write.
  CHECK(write_graph(g).find("GROUP 9 1 2\n") != std::string::npos);
  CHECK(g.gt_poses.size() == 1);
  CHECK(g.gt_lines.size() == 1);
  CHECK(g.gt_lines[0].line.n.y() == 1.5);
}

TEST_CASE("reader rejects malformed documents with exact positions") {
  check_parse_error("", 1, 1, "missing 'FORMAT rieman-graph 1'");
  check_parse_error("CAMERA 535 535 320 240 640 480\nFORMAT rieman-graph 1\n", 1,
                    1, "first record must be");
  check_parse_error("FORMAT rieman-graph 2\n", 1, 21, "unsupported format version");
  check_parse_error("FORMAT other-format 1\n", 1, 8, "unknown format");
  check_parse_error("FORMAT rieman-graph 1\nVERTEX_POSE 0 1 0 0 0 0 0 0\n", 3, 1,
                    "missing CAMERA record");
  check_parse_error(with_header("WHAT 3\n"), 3, 1, "unknown record 'WHAT'");
  check_parse_error(with_header("VERTEX_POSE 0 1 0 0 0 0 0\n"), 3, 26,
                    "missing tz");
  check_parse_error(with_header("VERTEX_POSE 0 1 0 0 0 0 0 0 9\n"), 3, 29,
                    "unexpected trailing token '9'");
  check_parse_error(with_header("VERTEX_POSE 0 1 0 0 0 nan 0 0\n"), 3, 23,
                    "non-finite value for tx");
  check_parse_error(with_header("VERTEX_POSE 0 inf 0 0 0 0 0 0\n"), 3, 15,
                    "non-finite");
  check_parse_error(with_header("VERTEX_POSE 0 2 0 0 0 0 0 0\n"), 3, 1,
                    "quaternion is not unit length");
  check_parse_error(with_header("VERTEX_POINT 5.5 1 2 3\n"), 3, 14,
                    "expected integer for id");
  check_parse_error(with_header("VERTEX_POINT 5 1 2 3\nVERTEX_POINT 5 4 5 6\n"),
                    4, 1, "duplicate point id 5 (first declared on line 3)");
  check_parse_error(with_header("VERTEX_LINE 1 0 1 0 0 0 0\n"), 3, 1,
                    "line direction is (numerically) zero");
  check_parse_error(with_header("VERTEX_LINE 1 1 0 0 1 0 0\n"), 3, 1,
                    "violate n.d = 0");
  check_parse_error(with_header("VERTEX_LINE 1 0 1 0 0 0 1\nGROUP 9 1\n"), 4, 1,
                    "group 9 needs at least 2 member lines");
  check_parse_error(
      with_header("VERTEX_LINE 1 0 1 0 0 0 1\nVERTEX_LINE 2 0 2 0 0 0 1\n"
                  "GROUP 9 1 7\n"),
      5, 1, "group 9 references unknown line 7");
  check_parse_error(
      with_header("VERTEX_LINE 1 0 1 0 0 0 1\nVERTEX_LINE 2 0 2 0 0 0 1\n"
                  "GROUP 9 1 2 1\n"),
      5, 1, "group 9 lists line 1 twice");
  check_parse_error(
      with_header("VERTEX_LINE 1 0 1 0 0 0 1\nVERTEX_LINE 2 0 2 0 0 0 1\n"
                  "VERTEX_LINE 3 0 3 0 0 0 1\nGROUP 8 1 2\nGROUP 9 2 3\n"),
      7, 1, "line 2 already belongs to group 8");
  check_parse_error(with_header("VERTEX_POINT 5 1 2 3\nEDGE_POINT 0 5 10 10\n"),
                    4, 1, "EDGE_POINT references unknown pose 0");
  check_parse_error(
      with_header("VERTEX_POSE 0 1 0 0 0 0 0 0\nEDGE_POINT 0 5 10 10\n"), 4, 1,
      "EDGE_POINT references unknown point 5");
  check_parse_error(
      with_header("VERTEX_POSE 0 1 0 0 0 0 0 0\nVERTEX_POINT 5 1 2 3\n"
                  "EDGE_POINT 0 5 10 10\nEDGE_POINT 0 5 11 11\n"),
      6, 1, "duplicate observation of point 5 from pose 0");
  check_parse_error(with_header("CAMERA 1 1 0 0 10 10\n"), 3, 1,
                    "duplicate CAMERA record");
  check_parse_error(
      "FORMAT rieman-graph 1\nCAMERA 0 535 320 240 640 480\n", 2, 1,
      "focal lengths must be positive");
  check_parse_error(
      "FORMAT rieman-graph 1\nFORMAT rieman-graph 1\n", 2, 1,
      "duplicate FORMAT record");
}

TEST_CASE("file helpers write and read through the filesystem") {
  const FactorGraph g = sample_scene(4);
  const std::string path = "/tmp/rieman_io_test.graph";
  write_graph_file(g, path);
  const FactorGraph back = read_graph_file(path);
  CHECK(write_graph(back) == write_graph(g));
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_graph_file("/tmp/definitely_missing_rieman.graph"),
                  ValidationError);
}

TEST_CASE("write_graph refuses invalid graphs") {
  FactorGraph g;  // no camera
  CHECK_THROWS_AS(write_graph(g), ValidationError);
}

TEST_CASE("empty config yields all defaults") {
  const RunConfig cfg = read_config("# only a comment\n\n");
  CHECK(cfg.solve.method == Method::PointStructRiemanLine);
  CHECK(cfg.solve.max_iterations == 20);
  CHECK(cfg.solve.damping_initial == 1e-4);
  CHECK(cfg.solve.damping_up == 10.0);
  CHECK(cfg.solve.damping_down == 0.5);
  CHECK(cfg.solve.rel_decrease_tol == 1e-8);
  CHECK(cfg.solve.step_norm_tol == 1e-12);
  CHECK(cfg.solve.loss.kind == LossKind::Cauchy);
  CHECK(cfg.solve.loss.scale == 1.0);
  CHECK(cfg.scene.archetype == SceneArchetype::Box);
  CHECK(cfg.scene.seed == 1);
  CHECK(cfg.scene.n_poses == 50);
  CHECK(cfg.scene.n_points == 120);
  CHECK(cfg.scene.n_lines == 20);
  CHECK(cfg.scene.n_groups == 2);
  CHECK(cfg.scene.pixel_noise_sigma == 1.0);
  CHECK(cfg.scene.intrinsics.fx == 535.0);
  CHECK(cfg.scene.image_width == 640);
}

TEST_CASE("config keys parse with types, ranges and comments") {
  const RunConfig cfg = read_config(
      "method = Point_OrthLine_Constr\n"
      "max_iterations = 77\n"
      "damping.initial = 0.001\n"
      "damping.up = 4\n"
      "damping.down = 0.25\n"
      "convergence.rel_decrease = 1e-9   # tight\n"
      "convergence.step_norm = 1e-13\n"
      "loss.kind = none\n"
      "loss.scale = 2.5\n"
      "archetype = corridor\n"
      "seed = 123456789012345\n"
      "n_poses = 44\n"
      "n_points = 10\n"
      "n_lines = 6\n"
      "n_groups = 3\n"
      "noise.pixel_sigma = 0.25\n"
      "perturb.rot = 0.02\n"
      "perturb.trans = 0.1\n"
      "perturb.point = 0.2\n"
      "perturb.line = 0.05\n"
      "camera.fx = 400\n"
      "camera.fy = 410\n"
      "camera.cx = 311\n"
      "camera.cy = 255\n"
      "image.width = 1024\n"
      "image.height = 768\n");
  CHECK(cfg.solve.method == Method::PointOrthLineConstr);
  CHECK(cfg.solve.max_iterations == 77);
  CHECK(cfg.solve.damping_initial == 0.001);
  CHECK(cfg.solve.damping_up == 4.0);
  CHECK(cfg.solve.damping_down == 0.25);
  CHECK(cfg.solve.rel_decrease_tol == 1e-9);
  CHECK(cfg.solve.step_norm_tol == 1e-13);
  CHECK(cfg.solve.loss.kind == LossKind::None);
  CHECK(cfg.solve.loss.scale == 2.5);
  CHECK(cfg.scene.archetype == SceneArchetype::Corridor);
  CHECK(cfg.scene.seed == 123456789012345ull);
  CHECK(cfg.scene.n_poses == 44);
  CHECK(cfg.scene.n_points == 10);
  CHECK(cfg.scene.n_lines == 6);
  CHECK(cfg.scene.n_groups == 3);
  CHECK(cfg.scene.pixel_noise_sigma == 0.25);
  CHECK(cfg.scene.perturb.rotation == 0.02);
  CHECK(cfg.scene.perturb.translation == 0.1);
  CHECK(cfg.scene.perturb.point == 0.2);
  CHECK(cfg.scene.perturb.line == 0.05);
  CHECK(cfg.scene.intrinsics.fx == 400.0);
  CHECK(cfg.scene.intrinsics.fy == 410.0);
  CHECK(cfg.scene.intrinsics.cx == 311.0);
  CHECK(cfg.scene.intrinsics.cy == 255.0);
  CHECK(cfg.scene.image_width == 1024);
  CHECK(cfg.scene.image_height == 768);
}

TEST_CASE("config rejects bad keys and values with exact positions") {
  check_config_error("  bogus_key = 3\n", 1, 3, "unknown configuration key");
  check_config_error("seed = 1\nseed = 2\n", 2, 1,
                     "duplicate key 'seed' (first set on line 1)");
  check_config_error("loss.scale = -1\n", 1, 14, "loss.scale must be positive");
  check_config_error("loss.kind = huber\n", 1, 13,
                     "loss.kind must be 'none' or 'cauchy'");
  check_config_error("method = Warp\n", 1, 10, "unknown method 'Warp'");
  check_config_error("archetype = donut\n", 1, 13, "unknown archetype");
  check_config_error("seed =\n", 1, 7, "missing value for key 'seed'");
  check_config_error(" = 5\n", 1, 1, "missing key before '='");
  check_config_error("max_iterations = 2.5\n", 1, 18, "expected an integer");
  check_config_error("max_iterations = 0\n", 1, 18, "max_iterations");
  check_config_error("damping.up = 1.0\n", 1, 14, "damping.up must be > 1");
  check_config_error("damping.down = 1.5\n", 1, 16, "damping.down");
  check_config_error("n_poses = 2\n", 1, 11, "n_poses");
  check_config_error("noise.pixel_sigma = -0.1\n", 1, 21, "noise.pixel_sigma");
  check_config_error("image.width = 0\n", 1, 15, "image.width");
  check_config_error("seed banana\n", 1, 1, "expected 'key = value'");
}

TEST_CASE("config file helper reports missing files") {
  CHECK_THROWS_AS(read_config_file("/tmp/surely_missing_rieman.cfg"),
                  ValidationError);
  const std::string path = "/tmp/rieman_cfg_test.cfg";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("n_poses = 12\n", f);
    std::fclose(f);
  }
  CHECK(read_config_file(path).scene.n_poses == 12);
  std::remove(path.c_str());
}
