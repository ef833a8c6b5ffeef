#include "lo3d/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "lo3d/errors.hpp"

namespace lo3d {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class LineError {
 public:
  explicit LineError(int line) : line_(line) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("scene spec line " + std::to_string(line_) + ": " + what);
  }

 private:
  int line_;
};

double read_number(std::istringstream& is, const LineError& err, const char* what) {
  std::string tok;
  if (!(is >> tok)) err.fail(std::string("missing ") + what);
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    err.fail(std::string("bad ") + what + " '" + tok + "'");
  }
}

SceneObject parse_object(const std::string& value, const LineError& err) {
  std::istringstream is(value);
  SceneObject o;
  std::string kind;
  if (!(is >> o.label >> kind)) err.fail("object needs a label and a shape");
  try {
    if (kind == "disc") {
      o.shape = Shape::disc(read_number(is, err, "radius"));
    } else if (kind == "rectangle") {
      const double w = read_number(is, err, "width");
      o.shape = Shape::rectangle(w, read_number(is, err, "height"));
    } else if (kind == "polygon") {
      const double n = read_number(is, err, "vertex count");
      if (n < 3 || n > 1e6 || n != static_cast<int>(n)) err.fail("polygon vertex count must be an integer >= 3");
      std::vector<Eigen::Vector2d> verts;
      for (int i = 0; i < static_cast<int>(n); ++i) {
        const double x = read_number(is, err, "vertex x");
        verts.emplace_back(x, read_number(is, err, "vertex y"));
      }
      o.shape = Shape::polygon(std::move(verts));
    } else {
      err.fail("unknown shape '" + kind + "'");
    }
  } catch (const ParameterError& e) {
    err.fail(e.what());
  }
  std::string tok;
  if (!(is >> tok) || tok != "at") err.fail("expected 'at' after the shape of '" + o.label + "'");
  o.position.x() = read_number(is, err, "x");
  o.position.y() = read_number(is, err, "y");
  if (is >> tok) {
    if (tok != "yaw") err.fail("unexpected token '" + tok + "'");
    o.yaw = read_number(is, err, "yaw");
  }
  if (is >> tok) err.fail("unexpected token '" + tok + "'");
  return o;
}

}  // namespace

std::string format_scene(const Scene& s) {
  std::ostringstream os;
  os << "task = " << to_string(s.task) << '\n';
  os << "seed = " << s.seed << '\n';
  os << "start = " << num(s.start.x()) << ' ' << num(s.start.y()) << '\n';
  os << "ee_radius = " << num(s.ee_radius) << '\n';
  os << "workspace = " << num(s.workspace.lo.x()) << ' ' << num(s.workspace.lo.y()) << ' ' << num(s.workspace.hi.x())
     << ' ' << num(s.workspace.hi.y()) << '\n';
  os << "q_star = " << num(s.q_star) << '\n';
  os << "cloud_points = " << s.cloud_points << '\n';
  os << "targets = " << join(s.target_labels) << '\n';
  os << "obstacles = " << join(s.obstacle_labels) << '\n';
  for (const auto& o : s.objects) {
    os << "object = " << o.label << ' ';
    switch (o.shape.kind) {
      case Shape::Kind::disc: os << "disc " << num(o.shape.radius); break;
      case Shape::Kind::rectangle: os << "rectangle " << num(o.shape.width) << ' ' << num(o.shape.height); break;
      case Shape::Kind::polygon:
        os << "polygon " << o.shape.vertices.size();
        for (const auto& v : o.shape.vertices) os << ' ' << num(v.x()) << ' ' << num(v.y());
        break;
    }
    os << " at " << num(o.position.x()) << ' ' << num(o.position.y());
    if (o.yaw != 0.0) os << " yaw " << num(o.yaw);
    os << '\n';
  }
  return os.str();
}

namespace {

Scene parse_block(const std::vector<std::pair<int, std::string>>& lines) {
  Scene s;
  std::map<std::string, int> seen;
  for (const auto& [lineno, raw] : lines) {
    const LineError err(lineno);
    const auto eq = raw.find('=');
    if (eq == std::string::npos) err.fail("expected 'key = value'");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    if (key != "object" && seen[key]++) err.fail("duplicate key '" + key + "'");
    std::istringstream is(value);
    if (key == "task") {
      try {
        s.task = parse_task_kind(value);
      } catch (const ConfigError& e) {
        err.fail(e.what());
      }
    } else if (key == "seed") {
      std::uint64_t v = 0;
      if (!(is >> v) || !is.eof()) err.fail("bad seed '" + value + "'");
      s.seed = v;
    } else if (key == "start") {
      s.start.x() = read_number(is, err, "start x");
      s.start.y() = read_number(is, err, "start y");
    } else if (key == "ee_radius") {
      s.ee_radius = read_number(is, err, "ee_radius");
    } else if (key == "workspace") {
      s.workspace.lo.x() = read_number(is, err, "workspace lo x");
      s.workspace.lo.y() = read_number(is, err, "workspace lo y");
      s.workspace.hi.x() = read_number(is, err, "workspace hi x");
      s.workspace.hi.y() = read_number(is, err, "workspace hi y");
    } else if (key == "q_star") {
      s.q_star = read_number(is, err, "q_star");
    } else if (key == "cloud_points") {
      const double v = read_number(is, err, "cloud_points");
      if (v < 1 || v != static_cast<int>(v)) err.fail("cloud_points must be a positive integer");
      s.cloud_points = static_cast<int>(v);
    } else if (key == "targets") {
      s.target_labels = split_labels(value);
    } else if (key == "obstacles") {
      s.obstacle_labels = split_labels(value);
    } else if (key == "object") {
      s.objects.push_back(parse_object(value, err));
    } else {
      err.fail("unknown key '" + key + "'");
    }
    std::string extra;
    if (key != "object" && key != "task" && key != "targets" && key != "obstacles" && key != "seed" && (is >> extra))
      err.fail("unexpected token '" + extra + "'");
  }
  if (!seen.count("task")) throw DataError("scene spec: missing key 'task'");
  if (!seen.count("seed")) throw DataError("scene spec: missing key 'seed'");
  s.validate();
  return s;
}

}  // namespace

std::vector<Scene> parse_scenes(const std::string& text) {
  std::vector<Scene> out;
  std::vector<std::pair<int, std::string>> block;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto flush = [&] {
    if (!block.empty()) out.push_back(parse_block(block));
    block.clear();
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line == "---") {
      flush();
      continue;
    }
    block.emplace_back(lineno, line);
  }
  flush();
  return out;
}

Scene parse_scene(const std::string& text) {
  auto scenes = parse_scenes(text);
  if (scenes.size() != 1) throw DataError("expected exactly one scene, found " + std::to_string(scenes.size()));
  return std::move(scenes.front());
}

std::string format_scenes(const std::vector<Scene>& scenes) {
  std::string out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (i) out += "---\n";
    out += format_scene(scenes[i]);
  }
  return out;
}

void write_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << format_scenes(scenes);
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenes(ss.str());
}

}  // namespace lo3d
