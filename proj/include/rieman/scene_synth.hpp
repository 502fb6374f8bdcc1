#pragma once

#include "rieman/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rieman {

enum class SceneArchetype { Corridor, Box, Sphere };

std::string archetype_name(SceneArchetype a);
SceneArchetype archetype_from_name(const std::string& name);

// Tangent-space noise applied to the ground truth to form the initial
// vertex estimates. Zero scales reproduce the truth exactly.
struct PerturbScales {
  double rotation = 0.05;    // rad, pose rotation tangent
  double translation = 0.25; // m, pose translation tangent
  double point = 0.25;       // m, Gaussian point offset
  double line = 0.1;         // minimal-line tangent units
};

struct SceneSpec {
  SceneArchetype archetype = SceneArchetype::Box;
  std::uint64_t seed = 1;
  int n_poses = 50;
  int n_points = 120;
  int n_lines = 20;
  int n_groups = 2;  // 0 leaves every line single
  double pixel_noise_sigma = 1.0;  // px, on every observed coordinate
  PerturbScales perturb;
  CameraIntrinsics intrinsics{535.0, 535.0, 320.0, 240.0};
  int image_width = 640;
  int image_height = 480;
};

// World-frame segment a rendered line observation is cut from.
struct TrueLineSegment {
  Id id = 0;
  Vec3 p_start = Vec3::Zero();
  Vec3 p_end = Vec3::Zero();
};

// Deterministic synthetic world: true trajectory and landmarks, rendered
// observations with pixel noise, and an initial graph whose vertices are
// the perturbed truth. The returned graph carries the truth in its GT
// records and validates cleanly; every landmark is observed from at least
// 3 poses before noise. Throws std::invalid_argument on a bad spec and
// GenerationError when visibility cannot be satisfied within the retry
// budget.
FactorGraph generate_scene(const SceneSpec& spec);

// Replaces the vertex records of a graph carrying ground truth with
// perturbed copies of that truth: poses move by a random SE(3) tangent,
// points by Gaussian offsets, lines by minimal-representation tangent
// noise (group members drift independently, so shared directions are lost
// until a solver restores them). Observations are untouched.
void perturb_from_truth(FactorGraph& graph, const PerturbScales& scales,
                        std::uint64_t seed);

}  // namespace rieman
