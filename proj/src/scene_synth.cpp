#include "rieman/scene_synth.hpp"

#include "rieman/line_repr.hpp"
#include "rieman/manifold.hpp"
#include "rieman/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

namespace rieman {

std::string archetype_name(SceneArchetype a) {
  switch (a) {
    case SceneArchetype::Corridor:
      return "corridor";
    case SceneArchetype::Box:
      return "box";
    case SceneArchetype::Sphere:
      return "sphere";
  }
  throw std::invalid_argument("archetype_name: unknown archetype");
}

SceneArchetype archetype_from_name(const std::string& name) {
  if (name == "corridor") return SceneArchetype::Corridor;
  if (name == "box") return SceneArchetype::Box;
  if (name == "sphere") return SceneArchetype::Sphere;
  throw ValidationError("unknown archetype '" + name +
                        "' (expected corridor, box or sphere)");
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinDepth = 0.2;      // m, in front of the camera
constexpr double kMinSegmentPx = 10.0;
constexpr int kPlacementRetries = 200;

// Substream ids; one independent stream per pose/landmark keeps generation
// order-independent and reproducible.
constexpr std::uint64_t kStreamPixelNoise = 1000;
constexpr std::uint64_t kStreamPosePerturb = 2000;
constexpr std::uint64_t kStreamPointPerturb = 3000;
constexpr std::uint64_t kStreamLinePerturb = 4000;
constexpr std::uint64_t kStreamPointPlace = 5000;
constexpr std::uint64_t kStreamLinePlace = 6000;
constexpr std::uint64_t kStreamGroupDir = 7000;

Vec3 gaussian3(Rng& rng) {
  const double a = rng.gaussian();
  const double b = rng.gaussian();
  const double c = rng.gaussian();
  return Vec3(a, b, c);
}

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v = gaussian3(rng);
    if (v.norm() > 1e-6) {
      return v.normalized();
    }
  }
}

// Camera z looks from eye toward target, x to the right, y down.
PoseSE3 look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (fwd.cross(up).norm() < 1e-6) {
    up = Vec3::UnitY();
  }
  const Vec3 x = fwd.cross(up).normalized();
  const Vec3 y = fwd.cross(x);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = fwd;
  return PoseSE3(R, eye);
}

struct Viewport {
  CameraIntrinsics K;
  double width = 0.0;
  double height = 0.0;
  double margin = 0.0;  // keeps noisy pixels inside the image
};

std::optional<Vec2> visible_pixel(const Viewport& vp, const PoseSE3& T_cw,
                                  const Vec3& P_w) {
  const Vec3 p = T_cw * P_w;
  if (p.z() < kMinDepth) {
    return std::nullopt;
  }
  const Vec2 px(vp.K.fx * p.x() / p.z() + vp.K.cx,
                vp.K.fy * p.y() / p.z() + vp.K.cy);
  if (px.x() < vp.margin || px.x() > vp.width - vp.margin ||
      px.y() < vp.margin || px.y() > vp.height - vp.margin) {
    return std::nullopt;
  }
  return px;
}

// Liang-Barsky clip of [a, b] against the margin rectangle.
bool clip_to_rect(const Viewport& vp, Vec2& a, Vec2& b) {
  const Vec2 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  const double bounds[4][2] = {
      {-d.x(), a.x() - vp.margin},
      {d.x(), vp.width - vp.margin - a.x()},
      {-d.y(), a.y() - vp.margin},
      {d.y(), vp.height - vp.margin - a.y()},
  };
  for (const auto& [p, q] : bounds) {
    if (p == 0.0) {
      if (q < 0.0) {
        return false;
      }
      continue;
    }
    const double r = q / p;
    if (p < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
  }
  if (t0 > t1) {
    return false;
  }
  const Vec2 a0 = a;
  a = a0 + t0 * d;
  b = a0 + t1 * d;
  return true;
}

// Projected segment after depth and image clipping, if it stays long
// enough to be a useful measurement.
std::optional<std::pair<Vec2, Vec2>> visible_segment(const Viewport& vp,
                                                     const PoseSE3& T_cw,
                                                     const Vec3& p_start,
                                                     const Vec3& p_end) {
  Vec3 a = T_cw * p_start;
  Vec3 b = T_cw * p_end;
  if (a.z() < kMinDepth && b.z() < kMinDepth) {
    return std::nullopt;
  }
  if (a.z() < kMinDepth || b.z() < kMinDepth) {
    const double t = (kMinDepth - a.z()) / (b.z() - a.z());
    const Vec3 cut = a + t * (b - a);
    (a.z() < kMinDepth ? a : b) = cut;
  }
  Vec2 pa(vp.K.fx * a.x() / a.z() + vp.K.cx, vp.K.fy * a.y() / a.z() + vp.K.cy);
  Vec2 pb(vp.K.fx * b.x() / b.z() + vp.K.cx, vp.K.fy * b.y() / b.z() + vp.K.cy);
  if (!clip_to_rect(vp, pa, pb)) {
    return std::nullopt;
  }
  if ((pb - pa).norm() < kMinSegmentPx) {
    return std::nullopt;
  }
  return std::make_pair(pa, pb);
}

int count_point_views(const Viewport& vp, const std::vector<PoseSE3>& T_cw,
                      const Vec3& P) {
  int n = 0;
  for (const PoseSE3& cam : T_cw) {
    n += visible_pixel(vp, cam, P).has_value() ? 1 : 0;
  }
  return n;
}

int count_line_views(const Viewport& vp, const std::vector<PoseSE3>& T_cw,
                     const TrueLineSegment& seg) {
  int n = 0;
  for (const PoseSE3& cam : T_cw) {
    n += visible_segment(vp, cam, seg.p_start, seg.p_end).has_value() ? 1 : 0;
  }
  return n;
}

// -------- archetype geometry --------

struct Archetype {
  virtual ~Archetype() = default;
  virtual PoseSE3 camera(int i, int n) const = 0;
  virtual Vec3 sample_point(Rng& rng) const = 0;
  // Fixed direction for group g, or a sampled one for single lines.
  virtual Vec3 group_direction(int g, Rng& rng) const = 0;
  virtual Vec3 single_direction(Rng& rng) const = 0;
  // Center and half-length for a line with the given unit direction.
  virtual std::pair<Vec3, double> sample_line_center(const Vec3& dir,
                                                     Rng& rng) const = 0;
};

// Rectangular hallway along x: walls y = +-2, floor z = 0, ceiling z = 3,
// x in [-8, 8]; the camera loops around the center at eye height looking
// along its direction of travel.
struct CorridorScene final : Archetype {
  PoseSE3 camera(int i, int n) const override {
    // Perimeter of the rectangle [-6,6] x [-1,1].
    const double lx = 12.0, ly = 2.0;
    const double per = 2.0 * (lx + ly);
    double s = per * static_cast<double>(i) / static_cast<double>(n);
    Vec3 p(0, 0, 1.5), t(0, 0, 0);
    if (s < lx) {
      p.x() = -6.0 + s;
      p.y() = -1.0;
      t = Vec3(1, 0, 0);
    } else if (s < lx + ly) {
      p.x() = 6.0;
      p.y() = -1.0 + (s - lx);
      t = Vec3(0, 1, 0);
    } else if (s < 2.0 * lx + ly) {
      p.x() = 6.0 - (s - lx - ly);
      p.y() = 1.0;
      t = Vec3(-1, 0, 0);
    } else {
      p.x() = -6.0;
      p.y() = 1.0 - (s - 2.0 * lx - ly);
      t = Vec3(0, -1, 0);
    }
    return look_at(p, p + t);
  }

  Vec3 sample_point(Rng& rng) const override {
    const double x = rng.uniform(-8.0, 8.0);
    switch (rng.uniform_int(0, 3)) {
      case 0:
        return Vec3(x, -2.0, rng.uniform(0.0, 3.0));
      case 1:
        return Vec3(x, 2.0, rng.uniform(0.0, 3.0));
      case 2:
        return Vec3(x, rng.uniform(-2.0, 2.0), 0.0);
      default:
        return Vec3(x, rng.uniform(-2.0, 2.0), 3.0);
    }
  }

  Vec3 group_direction(int g, Rng&) const override {
    return g % 2 == 0 ? Vec3::UnitX() : Vec3::UnitZ();
  }

  Vec3 single_direction(Rng& rng) const override { return random_unit(rng); }

  std::pair<Vec3, double> sample_line_center(const Vec3& dir,
                                             Rng& rng) const override {
    const double y = rng.uniform_int(0, 1) == 0 ? -1.98 : 1.98;
    if (std::abs(dir.x()) > 0.5) {  // along the corridor, on a wall
      return {Vec3(rng.uniform(-2.0, 2.0), y, rng.uniform(0.3, 2.7)), 6.0};
    }
    if (std::abs(dir.z()) > 0.5) {  // vertical, on a wall
      return {Vec3(rng.uniform(-7.0, 7.0), y, 1.5), 1.2};
    }
    return {Vec3(rng.uniform(-6.0, 6.0), rng.uniform(-1.5, 1.5),
                 rng.uniform(0.5, 2.5)),
            1.0};
  }
};

// Axis-aligned room [-4,4]^3; the camera rides a small inner circle with a
// vertical wave, always facing the walls.
struct BoxScene final : Archetype {
  PoseSE3 camera(int i, int n) const override {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    const Vec3 eye(1.8 * std::cos(a), 1.8 * std::sin(a),
                   1.2 * std::sin(2.0 * a));
    return look_at(eye, eye + Vec3(std::cos(a), std::sin(a), 0.0));
  }

  Vec3 sample_point(Rng& rng) const override {
    const double u = rng.uniform(-4.0, 4.0);
    const double v = rng.uniform(-4.0, 4.0);
    switch (rng.uniform_int(0, 5)) {
      case 0:
        return Vec3(-4.0, u, v);
      case 1:
        return Vec3(4.0, u, v);
      case 2:
        return Vec3(u, -4.0, v);
      case 3:
        return Vec3(u, 4.0, v);
      case 4:
        return Vec3(u, v, -4.0);
      default:
        return Vec3(u, v, 4.0);
    }
  }

  Vec3 group_direction(int g, Rng&) const override {
    return g % 2 == 0 ? Vec3::UnitZ() : Vec3::UnitX();
  }

  Vec3 single_direction(Rng& rng) const override { return random_unit(rng); }

  std::pair<Vec3, double> sample_line_center(const Vec3& dir,
                                             Rng& rng) const override {
    if (std::abs(dir.z()) > 0.5) {  // vertical edge on one of 4 walls
      const double u = rng.uniform(-3.5, 3.5);
      switch (rng.uniform_int(0, 3)) {
        case 0:
          return {Vec3(-3.98, u, 0.0), 3.2};
        case 1:
          return {Vec3(3.98, u, 0.0), 3.2};
        case 2:
          return {Vec3(u, -3.98, 0.0), 3.2};
        default:
          return {Vec3(u, 3.98, 0.0), 3.2};
      }
    }
    if (std::abs(dir.x()) > 0.5) {  // horizontal edge on y or z faces
      const double u = rng.uniform(-3.5, 3.5);
      const double c = rng.uniform(-0.5, 0.5);
      switch (rng.uniform_int(0, 3)) {
        case 0:
          return {Vec3(c, -3.98, u), 3.2};
        case 1:
          return {Vec3(c, 3.98, u), 3.2};
        case 2:
          return {Vec3(c, u, -3.98), 3.2};
        default:
          return {Vec3(c, u, 3.98), 3.2};
      }
    }
    return {Vec3(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                 rng.uniform(-3.0, 3.0)),
            1.5};
  }
};

// Point shell of radius 3 with tangent line bundles, viewed from a wide
// orbit so everything stays in frame.
struct SphereScene final : Archetype {
  PoseSE3 camera(int i, int n) const override {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    const Vec3 eye(10.0 * std::cos(a), 10.0 * std::sin(a),
                   2.0 * std::sin(2.0 * a));
    return look_at(eye, Vec3::Zero());
  }

  Vec3 sample_point(Rng& rng) const override { return 3.0 * random_unit(rng); }

  Vec3 group_direction(int, Rng& rng) const override {
    return random_unit(rng);
  }

  Vec3 single_direction(Rng& rng) const override { return random_unit(rng); }

  std::pair<Vec3, double> sample_line_center(const Vec3& dir,
                                             Rng& rng) const override {
    for (;;) {
      const Vec3 r = random_unit(rng);
      const Vec3 w = r - r.dot(dir) * dir;
      if (w.norm() > 1e-6) {
        return {3.0 * w.normalized(), 1.5};
      }
    }
  }
};

const Archetype& archetype_for(SceneArchetype a) {
  static const CorridorScene corridor;
  static const BoxScene box;
  static const SphereScene sphere;
  switch (a) {
    case SceneArchetype::Corridor:
      return corridor;
    case SceneArchetype::Box:
      return box;
    case SceneArchetype::Sphere:
      return sphere;
  }
  throw std::invalid_argument("unknown archetype");
}

void validate_spec(const SceneSpec& spec) {
  if (spec.n_poses < 3) {
    throw std::invalid_argument("scene needs at least 3 poses");
  }
  if (spec.n_points < 0 || spec.n_lines < 0 || spec.n_groups < 0) {
    throw std::invalid_argument("scene counts must be nonnegative");
  }
  if (spec.n_points + spec.n_lines < 1) {
    throw std::invalid_argument("scene needs at least one landmark");
  }
  if (spec.n_groups > 0 && spec.n_lines / spec.n_groups < 2) {
    throw std::invalid_argument(
        "each parallel group needs at least 2 lines; lower n_groups");
  }
  if (spec.pixel_noise_sigma < 0.0) {
    throw std::invalid_argument("pixel_noise_sigma must be >= 0");
  }
  if (spec.perturb.rotation < 0.0 || spec.perturb.translation < 0.0 ||
      spec.perturb.point < 0.0 || spec.perturb.line < 0.0) {
    throw std::invalid_argument("perturbation scales must be >= 0");
  }
  if (spec.intrinsics.fx <= 0.0 || spec.intrinsics.fy <= 0.0) {
    throw std::invalid_argument("focal lengths must be positive");
  }
  if (spec.image_width <= 0 || spec.image_height <= 0) {
    throw std::invalid_argument("image size must be positive");
  }
}

// First nonzero component of the direction positive; negation is exact, so
// group members keep bitwise-identical (up to sign) shared directions.
PluckerLine canonical_gt_line(const Vec3& center, const Vec3& unit_dir) {
  Vec3 n = unit_dir.cross(center);
  Vec3 d = unit_dir;
  for (int i = 0; i < 3; ++i) {
    if (d(i) != 0.0) {
      if (d(i) < 0.0) {
        n = -n;
        d = -d;
      }
      break;
    }
  }
  return PluckerLine{n, d};
}

}  // namespace

FactorGraph generate_scene(const SceneSpec& spec) {
  validate_spec(spec);
  const Archetype& world = archetype_for(spec.archetype);

  FactorGraph graph;
  graph.intrinsics = spec.intrinsics;
  graph.image_width = spec.image_width;
  graph.image_height = spec.image_height;

  Viewport vp;
  vp.K = spec.intrinsics;
  vp.width = static_cast<double>(spec.image_width);
  vp.height = static_cast<double>(spec.image_height);
  vp.margin = std::clamp(5.0 * spec.pixel_noise_sigma, 5.0,
                         std::min(vp.width, vp.height) / 8.0);

  std::vector<PoseSE3> T_wc, T_cw;
  for (int i = 0; i < spec.n_poses; ++i) {
    T_wc.push_back(world.camera(i, spec.n_poses));
    T_cw.push_back(T_wc.back().inverse());
    graph.gt_poses.push_back(make_pose_record(i, T_wc.back()));
  }

  // Points, re-sampled until each is visible from enough poses.
  std::vector<Vec3> points;
  for (int k = 0; k < spec.n_points; ++k) {
    Rng rng = Rng::substream(spec.seed, kStreamPointPlace + k);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const Vec3 P = world.sample_point(rng);
      if (count_point_views(vp, T_cw, P) >= 3) {
        points.push_back(P);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw GenerationError("point " + std::to_string(k) +
                            " is not visible from 3 poses after " +
                            std::to_string(kPlacementRetries) + " attempts");
    }
    graph.gt_points.push_back({k, points.back()});
  }

  // Lines: the first n_groups * (n_lines / n_groups) share group
  // directions, the remainder are single.
  const int group_size = spec.n_groups > 0 ? spec.n_lines / spec.n_groups : 0;
  const int n_grouped = spec.n_groups * group_size;
  std::vector<Vec3> group_dirs;
  for (int g = 0; g < spec.n_groups; ++g) {
    Rng rng = Rng::substream(spec.seed, kStreamGroupDir + g);
    group_dirs.push_back(world.group_direction(g, rng).normalized());
  }

  std::vector<TrueLineSegment> segments;
  for (int k = 0; k < spec.n_lines; ++k) {
    Rng rng = Rng::substream(spec.seed, kStreamLinePlace + k);
    const bool grouped = k < n_grouped;
    const int g = grouped ? k / group_size : -1;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const Vec3 dir =
          grouped ? group_dirs[g] : world.single_direction(rng).normalized();
      const auto [center, half] = world.sample_line_center(dir, rng);
      TrueLineSegment seg{k, center - half * dir, center + half * dir};
      if (count_line_views(vp, T_cw, seg) >= 3) {
        segments.push_back(seg);
        graph.gt_lines.push_back({k, canonical_gt_line(center, dir)});
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw GenerationError("line " + std::to_string(k) +
                            " is not visible from 3 poses after " +
                            std::to_string(kPlacementRetries) + " attempts");
    }
  }
  for (int g = 0; g < spec.n_groups; ++g) {
    GroupRecord rec;
    rec.id = g;
    for (int m = 0; m < group_size; ++m) {
      rec.line_ids.push_back(g * group_size + m);
    }
    graph.groups.push_back(rec);
  }

  // Observations: noiseless visibility decides what is seen, then noise is
  // added, then anything pushed outside the image is dropped.
  std::vector<int> point_views(points.size(), 0), line_views(segments.size(), 0);
  for (int i = 0; i < spec.n_poses; ++i) {
    Rng noise = Rng::substream(spec.seed, kStreamPixelNoise + i);
    const double sigma = spec.pixel_noise_sigma;
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto px = visible_pixel(vp, T_cw[i], points[k]);
      if (!px) continue;
      const Vec2 noisy =
          *px + sigma * Vec2(noise.gaussian(), noise.gaussian());
      if (noisy.x() < 0.0 || noisy.x() > vp.width || noisy.y() < 0.0 ||
          noisy.y() > vp.height) {
        continue;
      }
      graph.point_observations.push_back(
          {i, static_cast<Id>(k), noisy});
      ++point_views[k];
    }
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto seg =
          visible_segment(vp, T_cw[i], segments[k].p_start, segments[k].p_end);
      if (!seg) continue;
      const Vec2 s = seg->first + sigma * Vec2(noise.gaussian(), noise.gaussian());
      const Vec2 e = seg->second + sigma * Vec2(noise.gaussian(), noise.gaussian());
      const auto inside = [&](const Vec2& q) {
        return q.x() >= 0.0 && q.x() <= vp.width && q.y() >= 0.0 &&
               q.y() <= vp.height;
      };
      if (!inside(s) || !inside(e)) {
        continue;
      }
      LineObservation obs;
      obs.pose_id = i;
      obs.line_id = static_cast<Id>(k);
      obs.p_start = s;
      obs.p_end = e;
      graph.line_observations.push_back(obs);
      ++line_views[k];
    }
  }
  for (std::size_t k = 0; k < point_views.size(); ++k) {
    if (point_views[k] < 3) {
      throw GenerationError("point " + std::to_string(k) +
                            " lost observations to pixel noise; fewer than 3 remain");
    }
  }
  for (std::size_t k = 0; k < line_views.size(); ++k) {
    if (line_views[k] < 3) {
      throw GenerationError("line " + std::to_string(k) +
                            " lost observations to pixel noise; fewer than 3 remain");
    }
  }

  // Initial estimates: the truth, then perturbed.
  graph.poses = graph.gt_poses;
  graph.points = graph.gt_points;
  graph.lines = graph.gt_lines;
  perturb_from_truth(graph, spec.perturb, spec.seed);

  validate_graph(graph);
  return graph;
}

void perturb_from_truth(FactorGraph& graph, const PerturbScales& scales,
                        std::uint64_t seed) {
  if (graph.gt_poses.empty()) {
    throw std::invalid_argument(
        "perturb_from_truth: graph carries no ground truth");
  }

  auto sorted_ids = [](const auto& records) {
    std::vector<Id> ids;
    for (const auto& r : records) {
      ids.push_back(r.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  std::unordered_map<Id, const PoseRecord*> gt_pose;
  for (const PoseRecord& p : graph.gt_poses) gt_pose.emplace(p.id, &p);
  std::unordered_map<Id, const PointRecord*> gt_point;
  for (const PointRecord& p : graph.gt_points) gt_point.emplace(p.id, &p);
  std::unordered_map<Id, const LineRecord*> gt_line;
  for (const LineRecord& l : graph.gt_lines) gt_line.emplace(l.id, &l);

  graph.poses.clear();
  graph.points.clear();
  graph.lines.clear();

  const std::vector<Id> pose_ids = sorted_ids(graph.gt_poses);
  for (std::size_t i = 0; i < pose_ids.size(); ++i) {
    const PoseRecord& gt = *gt_pose.at(pose_ids[i]);
    // The lowest-id pose is the solver's gauge anchor. Perturbing it would
    // only rigidly move the frame every error is measured in, so it stays
    // at the truth.
    if (i == 0 || (scales.rotation == 0.0 && scales.translation == 0.0)) {
      graph.poses.push_back(gt);
      continue;
    }
    Rng rng = Rng::substream(seed, kStreamPosePerturb + i);
    Vec6 xi;
    xi.head<3>() = scales.rotation * gaussian3(rng);
    xi.tail<3>() = scales.translation * gaussian3(rng);
    graph.poses.push_back(
        make_pose_record(gt.id, se3_retract(gt.pose(), xi)));
  }

  const std::vector<Id> point_ids = sorted_ids(graph.gt_points);
  for (std::size_t i = 0; i < point_ids.size(); ++i) {
    const PointRecord& gt = *gt_point.at(point_ids[i]);
    if (scales.point == 0.0) {
      graph.points.push_back(gt);
      continue;
    }
    Rng rng = Rng::substream(seed, kStreamPointPerturb + i);
    graph.points.push_back({gt.id, gt.p + scales.point * gaussian3(rng)});
  }

  const std::vector<Id> line_ids = sorted_ids(graph.gt_lines);
  for (std::size_t i = 0; i < line_ids.size(); ++i) {
    const LineRecord& gt = *gt_line.at(line_ids[i]);
    if (scales.line == 0.0) {
      graph.lines.push_back(gt);
      continue;
    }
    Rng rng = Rng::substream(seed, kStreamLinePerturb + i);
    RiemanTangent t;
    t.delta_theta = scales.line * Vec2(rng.gaussian(), rng.gaussian());
    t.delta_gamma = scales.line * rng.gaussian();
    t.delta_scale = scales.line * rng.gaussian();
    const RiemanLine r = rieman_from_plucker(gt.line);
    graph.lines.push_back({gt.id, plucker_from_rieman(rieman_retract(r, t))});
  }
}

}  // namespace rieman
