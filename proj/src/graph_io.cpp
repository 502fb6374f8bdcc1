#include "rieman/graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <unordered_set>

namespace rieman {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open '" + path + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void store_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw ValidationError("failed writing '" + path + "'");
  }
}

struct Token {
  std::string_view text;
  int col = 0;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
      ++i;
    }
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

// One record line; consumes tokens left to right with typed accessors.
class RecordParser {
 public:
  RecordParser(int line, std::vector<Token> tokens)
      : line_(line), tokens_(std::move(tokens)) {}

  int line() const { return line_; }
  const Token& keyword() const { return tokens_.front(); }
  bool exhausted() const { return next_ >= tokens_.size(); }
  std::size_t remaining() const { return tokens_.size() - next_; }

  [[noreturn]] void fail(int col, const std::string& msg) const {
    throw ParseError(line_, col, msg);
  }

  const Token& take(const char* what) {
    if (exhausted()) {
      const Token& last = tokens_.back();
      fail(last.col + static_cast<int>(last.text.size()),
           std::string("missing ") + what);
    }
    return tokens_[next_++];
  }

  double number(const char* what) {
    const Token& t = take(what);
    double v = 0.0;
    const auto res =
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
      fail(t.col, std::string("expected number for ") + what + ", got '" +
                      std::string(t.text) + "'");
    }
    if (!std::isfinite(v)) {
      fail(t.col, std::string("non-finite value for ") + what);
    }
    return v;
  }

  Id integer(const char* what) {
    const Token& t = take(what);
    Id v = 0;
    const auto res =
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
      fail(t.col, std::string("expected integer for ") + what + ", got '" +
                      std::string(t.text) + "'");
    }
    return v;
  }

  void done() {
    if (!exhausted()) {
      const Token& t = tokens_[next_];
      fail(t.col, "unexpected trailing token '" + std::string(t.text) + "'");
    }
  }

 private:
  int line_;
  std::vector<Token> tokens_;
  std::size_t next_ = 1;  // token 0 is the record keyword
};

struct Where {
  int line = 0;
  int col = 0;
};

PoseRecord parse_pose(RecordParser& p) {
  PoseRecord r;
  r.id = p.integer("id");
  const double qw = p.number("qw");
  const double qx = p.number("qx");
  const double qy = p.number("qy");
  const double qz = p.number("qz");
  r.q = Eigen::Quaterniond(qw, qx, qy, qz);
  r.t.x() = p.number("tx");
  r.t.y() = p.number("ty");
  r.t.z() = p.number("tz");
  p.done();
  if (std::abs(r.q.norm() - 1.0) > 1e-6) {
    p.fail(p.keyword().col, "quaternion is not unit length (norm " +
                                format_double(r.q.norm()) + ")");
  }
  return r;
}

PointRecord parse_point(RecordParser& p) {
  PointRecord r;
  r.id = p.integer("id");
  r.p.x() = p.number("x");
  r.p.y() = p.number("y");
  r.p.z() = p.number("z");
  p.done();
  return r;
}

LineRecord parse_line(RecordParser& p) {
  LineRecord r;
  r.id = p.integer("id");
  r.line.n.x() = p.number("nx");
  r.line.n.y() = p.number("ny");
  r.line.n.z() = p.number("nz");
  r.line.d.x() = p.number("dx");
  r.line.d.y() = p.number("dy");
  r.line.d.z() = p.number("dz");
  p.done();
  if (r.line.d.norm() <= 1e-12) {
    p.fail(p.keyword().col, "line direction is (numerically) zero");
  }
  const double tol = 1e-6 * std::max(1.0, r.line.n.norm() * r.line.d.norm());
  if (std::abs(r.line.n.dot(r.line.d)) > tol) {
    p.fail(p.keyword().col, "Pluecker coordinates violate n.d = 0");
  }
  return r;
}

}  // namespace

FactorGraph read_graph(const std::string& text) {
  FactorGraph g;
  bool saw_format = false;
  bool saw_camera = false;

  std::unordered_map<Id, Where> pose_ids, point_ids, line_ids, group_ids;
  std::unordered_map<Id, Where> gt_pose_ids, gt_point_ids, gt_line_ids;
  struct PendingGroup {
    GroupRecord rec;
    Where where;
  };
  struct PendingPointEdge {
    PointObservation obs;
    Where where;
  };
  struct PendingLineEdge {
    LineObservation obs;
    Where where;
  };
  std::vector<PendingGroup> pending_groups;
  std::vector<PendingPointEdge> pending_point_edges;
  std::vector<PendingLineEdge> pending_line_edges;

  auto claim_id = [](std::unordered_map<Id, Where>& ids, Id id, Where w,
                     RecordParser& p, const char* kind) {
    const auto [it, inserted] = ids.emplace(id, w);
    if (!inserted) {
      p.fail(w.col, std::string("duplicate ") + kind + " id " +
                        std::to_string(id) + " (first declared on line " +
                        std::to_string(it->second.line) + ")");
    }
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line(
        text.data() + pos,
        (eol == std::string::npos ? text.size() : eol) - pos);
    ++line_no;
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;

    std::vector<Token> tokens = tokenize(line);
    if (tokens.empty() || tokens.front().text.front() == '#') {
      continue;
    }
    RecordParser p(line_no, std::move(tokens));
    const std::string_view kw = p.keyword().text;
    const Where here{line_no, p.keyword().col};

    if (kw == "FORMAT") {
      if (saw_format) {
        p.fail(here.col, "duplicate FORMAT record");
      }
      if (!g.poses.empty() || !g.points.empty() || !g.lines.empty() ||
          saw_camera || !pending_groups.empty() ||
          !pending_point_edges.empty() || !pending_line_edges.empty() ||
          !g.gt_poses.empty() || !g.gt_points.empty() || !g.gt_lines.empty()) {
        p.fail(here.col, "FORMAT must be the first record");
      }
      const Token& name = p.take("format name");
      if (name.text != "rieman-graph") {
        p.fail(name.col, "unknown format '" + std::string(name.text) +
                             "' (expected rieman-graph)");
      }
      const Token& ver = p.take("format version");
      if (ver.text != "1") {
        p.fail(ver.col, "unsupported format version " +
                            std::string(ver.text) + " (this reader handles 1)");
      }
      p.done();
      saw_format = true;
      continue;
    }
    if (!saw_format) {
      p.fail(here.col, "first record must be 'FORMAT rieman-graph 1'");
    }

    if (kw == "CAMERA") {
      if (saw_camera) {
        p.fail(here.col, "duplicate CAMERA record");
      }
      g.intrinsics.fx = p.number("fx");
      g.intrinsics.fy = p.number("fy");
      g.intrinsics.cx = p.number("cx");
      g.intrinsics.cy = p.number("cy");
      g.image_width = static_cast<int>(p.integer("width"));
      g.image_height = static_cast<int>(p.integer("height"));
      p.done();
      if (g.intrinsics.fx <= 0.0 || g.intrinsics.fy <= 0.0) {
        p.fail(here.col, "focal lengths must be positive");
      }
      if (g.image_width < 1 || g.image_height < 1) {
        p.fail(here.col, "image size must be positive");
      }
      saw_camera = true;
    } else if (kw == "VERTEX_POSE") {
      PoseRecord r = parse_pose(p);
      claim_id(pose_ids, r.id, here, p, "pose");
      g.poses.push_back(r);
    } else if (kw == "VERTEX_POINT") {
      PointRecord r = parse_point(p);
      claim_id(point_ids, r.id, here, p, "point");
      g.points.push_back(r);
    } else if (kw == "VERTEX_LINE") {
      LineRecord r = parse_line(p);
      claim_id(line_ids, r.id, here, p, "line");
      g.lines.push_back(r);
    } else if (kw == "GROUP") {
      PendingGroup pg;
      pg.where = here;
      pg.rec.id = p.integer("id");
      claim_id(group_ids, pg.rec.id, here, p, "group");
      while (!p.exhausted()) {
        pg.rec.line_ids.push_back(p.integer("member line id"));
      }
      if (pg.rec.line_ids.size() < 2) {
        p.fail(here.col, "group " + std::to_string(pg.rec.id) +
                             " needs at least 2 member lines");
      }
      pending_groups.push_back(std::move(pg));
    } else if (kw == "EDGE_POINT") {
      PendingPointEdge e;
      e.where = here;
      e.obs.pose_id = p.integer("pose id");
      e.obs.point_id = p.integer("point id");
      e.obs.pixel.x() = p.number("u");
      e.obs.pixel.y() = p.number("v");
      p.done();
      pending_point_edges.push_back(e);
    } else if (kw == "EDGE_LINE") {
      PendingLineEdge e;
      e.where = here;
      e.obs.pose_id = p.integer("pose id");
      e.obs.line_id = p.integer("line id");
      e.obs.p_start.x() = p.number("us");
      e.obs.p_start.y() = p.number("vs");
      e.obs.p_end.x() = p.number("ue");
      e.obs.p_end.y() = p.number("ve");
      p.done();
      pending_line_edges.push_back(e);
    } else if (kw == "GT_POSE") {
      PoseRecord r = parse_pose(p);
      claim_id(gt_pose_ids, r.id, here, p, "ground-truth pose");
      g.gt_poses.push_back(r);
    } else if (kw == "GT_POINT") {
      PointRecord r = parse_point(p);
      claim_id(gt_point_ids, r.id, here, p, "ground-truth point");
      g.gt_points.push_back(r);
    } else if (kw == "GT_LINE") {
      LineRecord r = parse_line(p);
      claim_id(gt_line_ids, r.id, here, p, "ground-truth line");
      g.gt_lines.push_back(r);
    } else {
      p.fail(here.col, "unknown record '" + std::string(kw) + "'");
    }
  }

  if (!saw_format) {
    throw ParseError(1, 1, "missing 'FORMAT rieman-graph 1' record");
  }
  if (!saw_camera) {
    throw ParseError(line_no, 1, "missing CAMERA record");
  }

  // Cross references, each reported at the referencing record.
  std::unordered_map<Id, Id> line_to_group;
  for (PendingGroup& pg : pending_groups) {
    std::unordered_set<Id> seen;
    for (const Id lid : pg.rec.line_ids) {
      if (line_ids.find(lid) == line_ids.end()) {
        throw ParseError(pg.where.line, pg.where.col,
                         "group " + std::to_string(pg.rec.id) +
                             " references unknown line " + std::to_string(lid));
      }
      if (!seen.insert(lid).second) {
        throw ParseError(pg.where.line, pg.where.col,
                         "group " + std::to_string(pg.rec.id) +
                             " lists line " + std::to_string(lid) + " twice");
      }
      const auto [it, inserted] = line_to_group.emplace(lid, pg.rec.id);
      if (!inserted) {
        throw ParseError(pg.where.line, pg.where.col,
                         "line " + std::to_string(lid) +
                             " already belongs to group " +
                             std::to_string(it->second));
      }
    }
    std::sort(pg.rec.line_ids.begin(), pg.rec.line_ids.end());
    g.groups.push_back(std::move(pg.rec));
  }
  std::set<std::pair<Id, Id>> point_edge_seen, line_edge_seen;
  for (const PendingPointEdge& e : pending_point_edges) {
    if (pose_ids.find(e.obs.pose_id) == pose_ids.end()) {
      throw ParseError(e.where.line, e.where.col,
                       "EDGE_POINT references unknown pose " +
                           std::to_string(e.obs.pose_id));
    }
    if (point_ids.find(e.obs.point_id) == point_ids.end()) {
      throw ParseError(e.where.line, e.where.col,
                       "EDGE_POINT references unknown point " +
                           std::to_string(e.obs.point_id));
    }
    if (!point_edge_seen.emplace(e.obs.pose_id, e.obs.point_id).second) {
      throw ParseError(e.where.line, e.where.col,
                       "duplicate observation of point " +
                           std::to_string(e.obs.point_id) + " from pose " +
                           std::to_string(e.obs.pose_id));
    }
    g.point_observations.push_back(e.obs);
  }
  for (const PendingLineEdge& e : pending_line_edges) {
    if (pose_ids.find(e.obs.pose_id) == pose_ids.end()) {
      throw ParseError(e.where.line, e.where.col,
                       "EDGE_LINE references unknown pose " +
                           std::to_string(e.obs.pose_id));
    }
    if (line_ids.find(e.obs.line_id) == line_ids.end()) {
      throw ParseError(e.where.line, e.where.col,
                       "EDGE_LINE references unknown line " +
                           std::to_string(e.obs.line_id));
    }
    if (!line_edge_seen.emplace(e.obs.pose_id, e.obs.line_id).second) {
      throw ParseError(e.where.line, e.where.col,
                       "duplicate observation of line " +
                           std::to_string(e.obs.line_id) + " from pose " +
                           std::to_string(e.obs.pose_id));
    }
    g.line_observations.push_back(e.obs);
  }

  // Canonical in-memory order regardless of file order.
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(g.poses.begin(), g.poses.end(), by_id);
  std::sort(g.points.begin(), g.points.end(), by_id);
  std::sort(g.lines.begin(), g.lines.end(), by_id);
  std::sort(g.groups.begin(), g.groups.end(), by_id);
  std::sort(g.gt_poses.begin(), g.gt_poses.end(), by_id);
  std::sort(g.gt_points.begin(), g.gt_points.end(), by_id);
  std::sort(g.gt_lines.begin(), g.gt_lines.end(), by_id);
  std::sort(g.point_observations.begin(), g.point_observations.end(),
            [](const PointObservation& a, const PointObservation& b) {
              return std::tie(a.pose_id, a.point_id) <
                     std::tie(b.pose_id, b.point_id);
            });
  std::sort(g.line_observations.begin(), g.line_observations.end(),
            [](const LineObservation& a, const LineObservation& b) {
              return std::tie(a.pose_id, a.line_id) <
                     std::tie(b.pose_id, b.line_id);
            });

  validate_graph(g);  // safety net; the checks above should cover it
  return g;
}

FactorGraph read_graph_file(const std::string& path) {
  return read_graph(load_file(path));
}

std::string write_graph(const FactorGraph& graph) {
  validate_graph(graph);

  FactorGraph g = graph;  // sorted copy; canonical order is part of the format
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(g.poses.begin(), g.poses.end(), by_id);
  std::sort(g.points.begin(), g.points.end(), by_id);
  std::sort(g.lines.begin(), g.lines.end(), by_id);
  std::sort(g.groups.begin(), g.groups.end(), by_id);
  std::sort(g.gt_poses.begin(), g.gt_poses.end(), by_id);
  std::sort(g.gt_points.begin(), g.gt_points.end(), by_id);
  std::sort(g.gt_lines.begin(), g.gt_lines.end(), by_id);
  std::sort(g.point_observations.begin(), g.point_observations.end(),
            [](const PointObservation& a, const PointObservation& b) {
              return std::tie(a.pose_id, a.point_id) <
                     std::tie(b.pose_id, b.point_id);
            });
  std::sort(g.line_observations.begin(), g.line_observations.end(),
            [](const LineObservation& a, const LineObservation& b) {
              return std::tie(a.pose_id, a.line_id) <
                     std::tie(b.pose_id, b.line_id);
            });

  std::string out;
  out.reserve(256 + 96 * (g.poses.size() + g.points.size() + g.lines.size() +
                          g.point_observations.size() +
                          g.line_observations.size()));
  auto emit = [&out](std::initializer_list<std::string> fields) {
    bool first = true;
    for (const std::string& f : fields) {
      if (!first) {
        out += ' ';
      }
      out += f;
      first = false;
    }
    out += '\n';
  };
  auto num = [](double v) { return format_double(v); };
  auto id = [](Id v) { return std::to_string(v); };

  emit({"FORMAT", "rieman-graph", "1"});
  emit({"CAMERA", num(g.intrinsics.fx), num(g.intrinsics.fy),
        num(g.intrinsics.cx), num(g.intrinsics.cy),
        std::to_string(g.image_width), std::to_string(g.image_height)});
  auto emit_pose = [&](const char* kw, const PoseRecord& r) {
    emit({kw, id(r.id), num(r.q.w()), num(r.q.x()), num(r.q.y()), num(r.q.z()),
          num(r.t.x()), num(r.t.y()), num(r.t.z())});
  };
  auto emit_point = [&](const char* kw, const PointRecord& r) {
    emit({kw, id(r.id), num(r.p.x()), num(r.p.y()), num(r.p.z())});
  };
  auto emit_line = [&](const char* kw, const LineRecord& r) {
    emit({kw, id(r.id), num(r.line.n.x()), num(r.line.n.y()),
          num(r.line.n.z()), num(r.line.d.x()), num(r.line.d.y()),
          num(r.line.d.z())});
  };
  for (const PoseRecord& r : g.poses) emit_pose("VERTEX_POSE", r);
  for (const PointRecord& r : g.points) emit_point("VERTEX_POINT", r);
  for (const LineRecord& r : g.lines) emit_line("VERTEX_LINE", r);
  for (const GroupRecord& r : g.groups) {
    std::vector<Id> members = r.line_ids;
    std::sort(members.begin(), members.end());
    out += "GROUP " + id(r.id);
    for (const Id m : members) {
      out += ' ';
      out += id(m);
    }
    out += '\n';
  }
  for (const PointObservation& o : g.point_observations) {
    emit({"EDGE_POINT", id(o.pose_id), id(o.point_id), num(o.pixel.x()),
          num(o.pixel.y())});
  }
  for (const LineObservation& o : g.line_observations) {
    emit({"EDGE_LINE", id(o.pose_id), id(o.line_id), num(o.p_start.x()),
          num(o.p_start.y()), num(o.p_end.x()), num(o.p_end.y())});
  }
  for (const PoseRecord& r : g.gt_poses) emit_pose("GT_POSE", r);
  for (const PointRecord& r : g.gt_points) emit_point("GT_POINT", r);
  for (const LineRecord& r : g.gt_lines) emit_line("GT_LINE", r);
  return out;
}

void write_graph_file(const FactorGraph& graph, const std::string& path) {
  store_file(path, write_graph(graph));
}

namespace {

struct ConfigEntry {
  std::string value;
  int line = 0;
  int col = 0;      // of the value
  int key_col = 0;  // of the key
};

double parse_config_double(const ConfigEntry& e, const std::string& key) {
  double v = 0.0;
  const auto res =
      std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size() ||
      !std::isfinite(v)) {
    throw ParseError(e.line, e.col,
                     "expected a finite number for " + key + ", got '" +
                         e.value + "'");
  }
  return v;
}

std::int64_t parse_config_int(const ConfigEntry& e, const std::string& key) {
  std::int64_t v = 0;
  const auto res =
      std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size()) {
    throw ParseError(e.line, e.col, "expected an integer for " + key +
                                        ", got '" + e.value + "'");
  }
  return v;
}

}  // namespace

RunConfig read_config(const std::string& text) {
  RunConfig cfg;

  std::map<std::string, ConfigEntry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line(
        text.data() + pos,
        (eol == std::string::npos ? text.size() : eol) - pos);
    ++line_no;
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;

    // Values never contain '#', so a comment may trail the pair.
    const std::size_t hash = line.find('#');
    const std::string_view code =
        hash == std::string_view::npos ? line : line.substr(0, hash);
    const std::vector<Token> tokens = tokenize(code);
    if (tokens.empty()) {
      continue;
    }
    const std::size_t eq = code.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, tokens.front().col,
                       "expected 'key = value', got '" +
                           std::string(tokens.front().text) + "...'");
    }
    auto trim = [](std::string_view s) {
      std::size_t a = 0, b = s.size();
      while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
      while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
      return s.substr(a, b - a);
    };
    const std::string_view key = trim(code.substr(0, eq));
    const std::string_view value = trim(code.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(line_no, 1, "missing key before '='");
    }
    if (value.empty()) {
      throw ParseError(line_no, static_cast<int>(eq) + 2,
                       "missing value for key '" + std::string(key) + "'");
    }
    const int value_col =
        static_cast<int>(value.data() - line.data()) + 1;
    const auto [it, inserted] = entries.emplace(
        std::string(key), ConfigEntry{std::string(value), line_no, value_col,
                                      tokens.front().col});
    if (!inserted) {
      throw ParseError(line_no, tokens.front().col,
                       "duplicate key '" + std::string(key) +
                           "' (first set on line " +
                           std::to_string(it->second.line) + ")");
    }
  }

  auto take = [&entries](const std::string& key) -> const ConfigEntry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  auto check = [](bool ok, const ConfigEntry& e, const std::string& msg) {
    if (!ok) {
      throw ParseError(e.line, e.col, msg);
    }
  };

  std::set<std::string> known;
  auto mark = [&known](const std::string& key) { known.insert(key); };

  auto number_key = [&](const std::string& key, double* dst,
                        auto&& validate) {
    mark(key);
    if (const ConfigEntry* e = take(key)) {
      const double v = parse_config_double(*e, key);
      validate(v, *e);
      *dst = v;
    }
  };
  auto int_key = [&](const std::string& key, int* dst, auto&& validate) {
    mark(key);
    if (const ConfigEntry* e = take(key)) {
      const std::int64_t v = parse_config_int(*e, key);
      validate(v, *e);
      *dst = static_cast<int>(v);
    }
  };

  const auto positive = [&check](const std::string& key) {
    return [&check, key](double v, const ConfigEntry& e) {
      check(v > 0.0, e, key + " must be positive");
    };
  };
  const auto nonnegative = [&check](const std::string& key) {
    return [&check, key](double v, const ConfigEntry& e) {
      check(v >= 0.0, e, key + " must be >= 0");
    };
  };
  const auto any = [](double, const ConfigEntry&) {};
  const auto int_min = [&check](const std::string& key, std::int64_t lo) {
    return [&check, key, lo](std::int64_t v, const ConfigEntry& e) {
      check(v >= lo, e, key + " must be >= " + std::to_string(lo));
    };
  };

  mark("method");
  if (const ConfigEntry* e = take("method")) {
    try {
      cfg.solve.method = method_from_name(e->value);
    } catch (const ValidationError& err) {
      throw ParseError(e->line, e->col, err.what());
    }
  }
  mark("max_iterations");
  if (const ConfigEntry* e = take("max_iterations")) {
    const std::int64_t v = parse_config_int(*e, "max_iterations");
    check(v >= 1, *e, "max_iterations must be >= 1");
    cfg.solve.max_iterations = static_cast<int>(v);
  }
  number_key("damping.initial", &cfg.solve.damping_initial,
             positive("damping.initial"));
  number_key("damping.up", &cfg.solve.damping_up,
             [&check](double v, const ConfigEntry& e) {
               check(v > 1.0, e, "damping.up must be > 1");
             });
  number_key("damping.down", &cfg.solve.damping_down,
             [&check](double v, const ConfigEntry& e) {
               check(v > 0.0 && v < 1.0, e, "damping.down must be in (0, 1)");
             });
  number_key("convergence.rel_decrease", &cfg.solve.rel_decrease_tol,
             positive("convergence.rel_decrease"));
  number_key("convergence.step_norm", &cfg.solve.step_norm_tol,
             positive("convergence.step_norm"));
  mark("loss.kind");
  if (const ConfigEntry* e = take("loss.kind")) {
    if (e->value == "none") {
      cfg.solve.loss.kind = LossKind::None;
    } else if (e->value == "cauchy") {
      cfg.solve.loss.kind = LossKind::Cauchy;
    } else {
      throw ParseError(e->line, e->col,
                       "loss.kind must be 'none' or 'cauchy', got '" +
                           e->value + "'");
    }
  }
  number_key("loss.scale", &cfg.solve.loss.scale, positive("loss.scale"));

  mark("archetype");
  if (const ConfigEntry* e = take("archetype")) {
    try {
      cfg.scene.archetype = archetype_from_name(e->value);
    } catch (const ValidationError& err) {
      throw ParseError(e->line, e->col, err.what());
    }
  }
  mark("seed");
  if (const ConfigEntry* e = take("seed")) {
    std::uint64_t v = 0;
    const auto res =
        std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (res.ec != std::errc() ||
        res.ptr != e->value.data() + e->value.size()) {
      throw ParseError(e->line, e->col,
                       "expected a nonnegative integer for seed, got '" +
                           e->value + "'");
    }
    cfg.scene.seed = v;
  }
  int_key("n_poses", &cfg.scene.n_poses, int_min("n_poses", 3));
  int_key("n_points", &cfg.scene.n_points, int_min("n_points", 0));
  int_key("n_lines", &cfg.scene.n_lines, int_min("n_lines", 0));
  int_key("n_groups", &cfg.scene.n_groups, int_min("n_groups", 0));
  number_key("noise.pixel_sigma", &cfg.scene.pixel_noise_sigma,
             nonnegative("noise.pixel_sigma"));
  number_key("perturb.rot", &cfg.scene.perturb.rotation,
             nonnegative("perturb.rot"));
  number_key("perturb.trans", &cfg.scene.perturb.translation,
             nonnegative("perturb.trans"));
  number_key("perturb.point", &cfg.scene.perturb.point,
             nonnegative("perturb.point"));
  number_key("perturb.line", &cfg.scene.perturb.line,
             nonnegative("perturb.line"));
  number_key("camera.fx", &cfg.scene.intrinsics.fx, positive("camera.fx"));
  number_key("camera.fy", &cfg.scene.intrinsics.fy, positive("camera.fy"));
  number_key("camera.cx", &cfg.scene.intrinsics.cx, any);
  number_key("camera.cy", &cfg.scene.intrinsics.cy, any);
  int_key("image.width", &cfg.scene.image_width, int_min("image.width", 1));
  int_key("image.height", &cfg.scene.image_height, int_min("image.height", 1));

  for (const auto& [key, e] : entries) {
    if (known.find(key) == known.end()) {
      throw ParseError(e.line, e.key_col,
                       "unknown configuration key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig read_config_file(const std::string& path) {
  return read_config(load_file(path));
}

}  // namespace rieman
