#include "lo3d/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lo3d {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

class Canvas {
 public:
  Canvas(const Workspace& ws, const SvgStyle& style) : ws_(ws), style_(style) {
    scale_ = style.size_px / ws.extent();
  }

  std::string x(double wx) const { return fmt((wx - ws_.lo.x()) * scale_); }
  std::string y(double wy) const { return fmt((ws_.hi.y() - wy) * scale_); }
  std::string len(double w) const { return fmt(w * scale_); }
  std::string pt(const Eigen::Vector2d& p) const { return x(p.x()) + "," + y(p.y()); }
  double width() const { return (ws_.hi.x() - ws_.lo.x()) * scale_; }
  double height() const { return (ws_.hi.y() - ws_.lo.y()) * scale_; }

  std::string fmt(double v) const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(style_.precision > 0 ? std::min(style_.precision, 9) : 3);
    os << v;
    return os.str();
  }

 private:
  const Workspace& ws_;
  const SvgStyle& style_;
  double scale_ = 1.0;
};

}  // namespace

std::string render_episode_svg(const Scene& scene, const EpisodeTrace& trace, const EpisodeResult* result,
                               const SvgStyle& style) {
  const Canvas c(scene.workspace, style);
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.fmt(c.width()) << "\" height=\""
     << c.fmt(c.height()) << "\" viewBox=\"0 0 " << c.fmt(c.width()) << ' ' << c.fmt(c.height()) << "\">\n";
  if (result) {
    os << "  <title>success=" << (result->success ? 1 : 0) << " collided=" << (result->collided ? 1 : 0)
       << " plans=" << result->plans_issued << "</title>\n";
  }
  os << "  <rect class=\"frame\" x=\"0\" y=\"0\" width=\"" << c.fmt(c.width()) << "\" height=\"" << c.fmt(c.height())
     << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";

  auto is_obstacle = [&](const std::string& l) {
    return std::find(scene.obstacle_labels.begin(), scene.obstacle_labels.end(), l) != scene.obstacle_labels.end();
  };
  auto is_target = [&](const std::string& l) {
    return std::find(scene.target_labels.begin(), scene.target_labels.end(), l) != scene.target_labels.end();
  };

  for (const auto& o : scene.objects) {
    const char* fill = is_obstacle(o.label) ? "#d9534f" : is_target(o.label) ? "#e8a33d" : "#9aa5b1";
    const std::string attrs = " class=\"object\" data-label=\"" + escape(o.label) + "\" fill=\"" + fill +
                              "\" fill-opacity=\"0.6\" stroke=\"black\" stroke-width=\"0.5\"";
    switch (o.shape.kind) {
      case Shape::Kind::disc:
        os << "  <circle" << attrs << " cx=\"" << c.x(o.position.x()) << "\" cy=\"" << c.y(o.position.y())
           << "\" r=\"" << c.len(o.shape.radius) << "\"/>\n";
        break;
      case Shape::Kind::rectangle:
      case Shape::Kind::polygon: {
        std::vector<Eigen::Vector2d> verts = o.shape.vertices;
        if (o.shape.kind == Shape::Kind::rectangle) {
          const double w = o.shape.width / 2, h = o.shape.height / 2;
          verts = {{-w, -h}, {w, -h}, {w, h}, {-w, h}};
        }
        os << "  <polygon" << attrs << " points=\"";
        const double cs = std::cos(o.yaw), sn = std::sin(o.yaw);
        for (std::size_t i = 0; i < verts.size(); ++i) {
          const Eigen::Vector2d p = o.position + Eigen::Vector2d(cs * verts[i].x() - sn * verts[i].y(),
                                                                 sn * verts[i].x() + cs * verts[i].y());
          os << (i ? " " : "") << c.pt(p);
        }
        os << "\"/>\n";
        break;
      }
    }
  }

  for (const auto& o : scene.objects) {
    if (!is_obstacle(o.label)) continue;
    os << "  <circle class=\"qstar\" data-label=\"" << escape(o.label) << "\" cx=\"" << c.x(o.position.x())
       << "\" cy=\"" << c.y(o.position.y()) << "\" r=\"" << c.len(o.shape.effective_radius() + scene.q_star)
       << "\" fill=\"none\" stroke=\"#d9534f\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t i = 0; i < trace.plans.size(); ++i) {
    const auto& plan = trace.plans[i];
    os << "  <g class=\"plan\" data-index=\"" << i << "\" fill=\"#337ab7\" fill-opacity=\"0.5\">\n";
    for (Eigen::Index r = 0; r < plan.rows(); ++r)
      os << "    <circle class=\"waypoint\" cx=\"" << c.x(plan(r, 0)) << "\" cy=\"" << c.y(plan(r, 1))
         << "\" r=\"1.5\"/>\n";
    os << "  </g>\n";
  }

  if (!trace.executed.empty()) {
    os << "  <polyline class=\"path\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < trace.executed.size(); ++i) os << (i ? " " : "") << c.pt(trace.executed[i]);
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lo3d
