#include "aido/svg.hpp"

#include "aido/error.hpp"

#include <cmath>
#include <cstdio>

namespace aido::harness {

namespace {

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Canvas {
  double height;
  std::string out;

  std::string pt(Vec2 p) const { return f4(p.x) + "," + f4(height - p.y); }

  void polyline(const std::vector<Vec2>& pts, bool closed, const char* cls, const char* stroke, double width,
                const char* dash = nullptr) {
    if (pts.size() < 2) return;
    out += closed ? "<polygon" : "<polyline";
    out += " class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + f4(width) + "\"";
    if (dash) out += " stroke-dasharray=\"" + std::string(dash) + "\"";
    out += " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out += ' ';
      out += pt(pts[i]);
    }
    out += "\"/>\n";
  }
};

std::vector<Vec2> offset(const world::LanePolyline& lane, double left) {
  std::vector<Vec2> pts;
  pts.reserve(lane.points.size());
  for (std::size_t i = 0; i < lane.points.size(); ++i) {
    const double a = lane.tangent_at(lane.cumulative[i]);
    pts.push_back(lane.points[i] + Vec2{-std::sin(a), std::cos(a)} * left);
  }
  return pts;
}

const char* zone_color(world::Zone z) {
  switch (z) {
    case world::Zone::right_lane: return "#1a9641";
    case world::Zone::wrong_lane: return "#fdae61";
    case world::Zone::off_road: return "#d7191c";
  }
  return "#000000";
}

} // namespace

std::string trajectory_svg(const world::TileMap& map, const Trajectory& traj, const std::vector<sim::Obstacle>& obstacles) {
  if (traj.samples.empty()) throw ValidationError("cannot draw an empty trajectory");
  const double ts = map.tile_size();
  Canvas c{map.height(), {}};
  c.out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + f4(map.width()) + " " + f4(map.height()) +
           "\" width=\"" + f4(map.width() * 1000.0) + "\" height=\"" + f4(map.height() * 1000.0) + "\">\n";
  for (int r = 0; r < map.rows(); ++r) {
    for (int col = 0; col < map.cols(); ++col) {
      const bool road = world::is_drivable(map.at(r, col).kind);
      c.out += "<rect class=\"tile\" x=\"" + f4(col * ts) + "\" y=\"" + f4(r * ts) + "\" width=\"" + f4(ts) +
               "\" height=\"" + f4(ts) + "\" fill=\"" + (road ? "#3a3a3a" : "#7fbf7f") + "\"/>\n";
    }
  }

  if (map.drivable_count() > 0) {
    const world::LanePolyline lane = world::lane_centerline(map);
    const double q = ts / 4.0;
    c.polyline(offset(lane, q), lane.closed, "yellow", "#ffd700", ts / 25.0, "0.06 0.06");
    c.polyline(offset(lane, -q), lane.closed, "white", "#ffffff", ts / 25.0);
    c.polyline(offset(lane, 3.0 * q), lane.closed, "white", "#ffffff", ts / 25.0);
  }

  for (const auto& o : obstacles) {
    c.out += "<circle class=\"obstacle\" cx=\"" + f4(o.center.x) + "\" cy=\"" + f4(c.height - o.center.y) + "\" r=\"" +
             f4(o.radius) + "\" fill=\"#ff7f00\"/>\n";
  }

  // one polyline per run of samples in the same zone, joined end to end
  std::vector<Vec2> run{{traj.start.x, traj.start.y}};
  world::Zone zone = traj.samples.front().zone;
  for (const auto& s : traj.samples) {
    const Vec2 p{s.state.x, s.state.y};
    if (s.zone != zone) {
      c.polyline(run, false, "trajectory", zone_color(zone), ts / 60.0);
      run = {run.back()};
      zone = s.zone;
    }
    run.push_back(p);
  }
  c.polyline(run, false, "trajectory", zone_color(zone), ts / 60.0);
  c.out += "</svg>\n";
  return c.out;
}

} // namespace aido::harness
