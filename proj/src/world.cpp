#include "aido/world.hpp"

#include "aido/error.hpp"
#include "aido/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace aido::world {

using json = nlohmann::json;

Heading left_of(Heading h) {
  switch (h) {
  case Heading::N: return Heading::W;
  case Heading::W: return Heading::S;
  case Heading::S: return Heading::E;
  case Heading::E: return Heading::N;
  }
  return Heading::N;
}

Heading right_of(Heading h) { return opposite(left_of(h)); }

Heading opposite(Heading h) { return left_of(left_of(h)); }

double heading_angle(Heading h) {
  switch (h) {
  case Heading::E: return 0.0;
  case Heading::N: return kPi / 2.0;
  case Heading::W: return kPi;
  case Heading::S: return -kPi / 2.0;
  }
  return 0.0;
}

Vec2 heading_vector(Heading h) {
  switch (h) {
  case Heading::E: return {1.0, 0.0};
  case Heading::N: return {0.0, 1.0};
  case Heading::W: return {-1.0, 0.0};
  case Heading::S: return {0.0, -1.0};
  }
  return {};
}

bool is_drivable(TileKind k) { return k != TileKind::empty; }

bool is_intersection(TileKind k) { return k == TileKind::three_way || k == TileKind::four_way; }

Heading exit_heading(const Tile& t) {
  switch (t.kind) {
  case TileKind::curve_left: return left_of(t.orientation);
  case TileKind::curve_right: return right_of(t.orientation);
  default: return t.orientation;
  }
}

bool is_open_side(const Tile& t, Heading side) {
  switch (t.kind) {
  case TileKind::four_way: return true;
  case TileKind::three_way: return side != opposite(t.orientation);
  default: return false;
  }
}

std::string_view to_string(TileKind k) {
  switch (k) {
  case TileKind::straight: return "straight";
  case TileKind::curve_left: return "curve_left";
  case TileKind::curve_right: return "curve_right";
  case TileKind::three_way: return "three_way";
  case TileKind::four_way: return "four_way";
  case TileKind::empty: return "empty";
  }
  return "empty";
}

std::string_view to_string(Heading h) {
  switch (h) {
  case Heading::N: return "N";
  case Heading::E: return "E";
  case Heading::S: return "S";
  case Heading::W: return "W";
  }
  return "N";
}

std::string_view to_string(Zone z) {
  switch (z) {
  case Zone::right_lane: return "right_lane";
  case Zone::wrong_lane: return "wrong_lane";
  case Zone::off_road: return "off_road";
  }
  return "off_road";
}

TileMap::TileMap(int rows, int cols, double tile_size)
    : rows_(rows), cols_(cols), tile_size_(tile_size) {
  if (rows < 1 || cols < 1) throw DimensionError("map needs at least one row and one column");
  if (!(tile_size > 0.0) || !std::isfinite(tile_size)) throw ValidationError("tile size must be positive");
  grid_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), Tile{});
}

const Tile& TileMap::at(int row, int col) const {
  return grid_[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col)];
}

void TileMap::set(int row, int col, Tile t) {
  if (t.kind == TileKind::empty) t.orientation = Heading::N;
  grid_[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col)] = t;
}

std::optional<std::pair<int, int>> TileMap::cell_at(Vec2 p) const {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < width() && p.y < height())) return std::nullopt;
  const int col = static_cast<int>(p.x / tile_size_);
  const int row = rows_ - 1 - static_cast<int>(p.y / tile_size_);
  if (!in_bounds(row, col)) return std::nullopt;
  return std::make_pair(row, col);
}

Vec2 TileMap::tile_center(int row, int col) const {
  return {(col + 0.5) * tile_size_, (rows_ - row - 0.5) * tile_size_};
}

int TileMap::drivable_count() const {
  return static_cast<int>(std::count_if(grid_.begin(), grid_.end(), [](const Tile& t) { return is_drivable(t.kind); }));
}

std::pair<int, int> step_cell(int row, int col, Heading h) {
  switch (h) {
  case Heading::N: return {row - 1, col};
  case Heading::S: return {row + 1, col};
  case Heading::E: return {row, col + 1};
  case Heading::W: return {row, col - 1};
  }
  return {row, col};
}

namespace {

constexpr std::array<Heading, 4> kHeadings{Heading::N, Heading::E, Heading::S, Heading::W};

Tile parse_tile_code(std::string_view code) {
  const auto slash = code.find('/');
  const std::string_view kind_name = code.substr(0, slash);
  static constexpr std::array<TileKind, 6> kinds{TileKind::straight, TileKind::curve_left, TileKind::curve_right,
                                                 TileKind::three_way, TileKind::four_way, TileKind::empty};
  const auto kind = std::find_if(kinds.begin(), kinds.end(), [&](TileKind k) { return to_string(k) == kind_name; });
  if (kind == kinds.end()) throw ParseError("unknown tile code '" + std::string(code) + "'");

  Tile tile{*kind, Heading::N};
  if (slash == std::string_view::npos) {
    if (*kind != TileKind::empty && *kind != TileKind::four_way)
      throw ParseError("tile code '" + std::string(code) + "' needs an orientation");
    return tile;
  }
  const std::string_view orient = code.substr(slash + 1);
  const auto h = std::find_if(kHeadings.begin(), kHeadings.end(), [&](Heading x) { return to_string(x) == orient; });
  if (h == kHeadings.end()) throw ParseError("bad orientation in tile code '" + std::string(code) + "'");
  tile.orientation = *kind == TileKind::empty ? Heading::N : *h;
  return tile;
}

bool enters_from(const Tile& t, Heading travel) {
  if (is_intersection(t.kind)) return is_open_side(t, opposite(travel));
  return is_drivable(t.kind) && t.orientation == travel;
}

bool exits_toward(const Tile& t, Heading travel) {
  if (is_intersection(t.kind)) return is_open_side(t, travel);
  return is_drivable(t.kind) && exit_heading(t) == travel;
}

std::string cell_name(int r, int c) { return "(" + std::to_string(r) + "," + std::to_string(c) + ")"; }

} // namespace

void validate_connectivity(const TileMap& map) {
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const Tile& t = map.at(r, c);
      if (!is_drivable(t.kind)) continue;

      if (is_intersection(t.kind)) {
        for (Heading side : kHeadings) {
          if (!is_open_side(t, side)) continue;
          auto [nr, nc] = step_cell(r, c, side);
          if (!map.in_bounds(nr, nc)) throw ValidationError("intersection " + cell_name(r, c) + " opens off the map");
          const Tile& n = map.at(nr, nc);
          if (!enters_from(n, side) && !exits_toward(n, opposite(side)))
            throw ValidationError("intersection " + cell_name(r, c) + " side " + std::string(to_string(side)) +
                                  " has no connecting lane");
        }
        continue;
      }

      const Heading out = exit_heading(t);
      auto [er, ec] = step_cell(r, c, out);
      if (!map.in_bounds(er, ec) || !enters_from(map.at(er, ec), out))
        throw ValidationError("lane exit of tile " + cell_name(r, c) + " is not connected");

      auto [pr, pc] = step_cell(r, c, opposite(t.orientation));
      if (!map.in_bounds(pr, pc) || !exits_toward(map.at(pr, pc), t.orientation))
        throw ValidationError("lane entry of tile " + cell_name(r, c) + " is not connected");
    }
  }
}

TileMap parse_map(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("map document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("map document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "tile_size_m" && key != "grid") throw ParseError("unknown map key '" + key + "'");
  }
  if (!doc.contains("grid") || !doc["grid"].is_array() || doc["grid"].empty())
    throw ParseError("map document needs a non-empty 'grid' array");

  double tile_size = 0.6;
  if (doc.contains("tile_size_m")) {
    if (!doc["tile_size_m"].is_number()) throw ParseError("'tile_size_m' must be a number");
    tile_size = doc["tile_size_m"].get<double>();
  }

  const auto& grid = doc["grid"];
  const std::size_t cols = grid[0].is_array() ? grid[0].size() : 0;
  if (cols == 0) throw ParseError("grid rows must be non-empty arrays");
  TileMap map(static_cast<int>(grid.size()), static_cast<int>(cols), tile_size);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (!grid[r].is_array() || grid[r].size() != cols) throw ParseError("grid rows must all have the same length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!grid[r][c].is_string()) throw ParseError("tile codes must be strings");
      map.set(static_cast<int>(r), static_cast<int>(c), parse_tile_code(grid[r][c].get<std::string>()));
    }
  }
  return map;
}

TileMap load_map(std::string_view document) {
  TileMap map = parse_map(document);
  validate_connectivity(map);
  return map;
}

std::string serialize_map(const TileMap& map) {
  std::string out = "{\"tile_size_m\":" + json(map.tile_size()).dump() + ",\"grid\":[";
  for (int r = 0; r < map.rows(); ++r) {
    if (r > 0) out += ',';
    out += '[';
    for (int c = 0; c < map.cols(); ++c) {
      if (c > 0) out += ',';
      const Tile& t = map.at(r, c);
      out += '"';
      out += to_string(t.kind);
      if (t.kind != TileKind::empty) {
        out += '/';
        out += to_string(t.orientation);
      }
      out += '"';
    }
    out += ']';
  }
  out += "]}";
  return out;
}

std::string canonical_ring_document() {
  return R"({"tile_size_m":0.6,"grid":[["curve_left/W","straight/W","curve_left/N"],)"
         R"(["straight/S","empty","straight/N"],["curve_left/S","straight/E","curve_left/E"]]})";
}

TileMap reverse_map(const TileMap& map) {
  TileMap out(map.rows(), map.cols(), map.tile_size());
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      Tile t = map.at(r, c);
      switch (t.kind) {
      case TileKind::straight: t.orientation = opposite(t.orientation); break;
      case TileKind::curve_left: t = {TileKind::curve_right, opposite(exit_heading(t))}; break;
      case TileKind::curve_right: t = {TileKind::curve_left, opposite(exit_heading(t))}; break;
      default: break;
      }
      out.set(r, c, t);
    }
  }
  return out;
}

TileMap generate_random_map(std::uint64_t seed, int rows, int cols) {
  if (rows < 3 || cols < 3) throw DimensionError("random maps need at least 3x3 tiles");
  Rng rng(seed);

  // Start from the boundary of a random sub-rectangle, then grow it with
  // "bumps": an edge a->b is replaced by a->a'->b'->b where a', b' are the
  // free cells beside it. Every bump keeps the cell cycle simple.
  const int r0 = static_cast<int>(rng.between(0, rows - 2));
  const int r1 = static_cast<int>(rng.between(r0 + 1, rows - 1));
  const int c0 = static_cast<int>(rng.between(0, cols - 2));
  const int c1 = static_cast<int>(rng.between(c0 + 1, cols - 1));

  std::vector<std::pair<int, int>> loop;
  for (int c = c0; c <= c1; ++c) loop.emplace_back(r0, c);
  for (int r = r0 + 1; r <= r1; ++r) loop.emplace_back(r, c1);
  for (int c = c1 - 1; c >= c0; --c) loop.emplace_back(r1, c);
  for (int r = r1 - 1; r > r0; --r) loop.emplace_back(r, c0);

  std::vector<char> used(static_cast<std::size_t>(rows * cols), 0);
  auto idx = [cols](int r, int c) { return static_cast<std::size_t>(r * cols + c); };
  for (auto [r, c] : loop) used[idx(r, c)] = 1;

  const int attempts = static_cast<int>(rng.between(0, 3 * rows * cols));
  for (int k = 0; k < attempts; ++k) {
    const std::size_t i = rng.below(loop.size());
    const auto a = loop[i];
    const auto b = loop[(i + 1) % loop.size()];
    const int dr = b.first - a.first;
    const int dc = b.second - a.second;
    const int side = rng.below(2) == 0 ? 1 : -1;
    const int pr = -dc * side;
    const int pc = dr * side;
    const std::pair<int, int> a2{a.first + pr, a.second + pc};
    const std::pair<int, int> b2{b.first + pr, b.second + pc};
    auto free_cell = [&](std::pair<int, int> p) {
      return p.first >= 0 && p.second >= 0 && p.first < rows && p.second < cols && !used[idx(p.first, p.second)];
    };
    if (!free_cell(a2) || !free_cell(b2)) continue;
    loop.insert(loop.begin() + static_cast<std::ptrdiff_t>(i) + 1, {a2, b2});
    used[idx(a2.first, a2.second)] = 1;
    used[idx(b2.first, b2.second)] = 1;
  }
  if (rng.below(2) == 1) std::reverse(loop.begin(), loop.end());

  auto heading_between = [](std::pair<int, int> from, std::pair<int, int> to) {
    if (to.first < from.first) return Heading::N;
    if (to.first > from.first) return Heading::S;
    if (to.second > from.second) return Heading::E;
    return Heading::W;
  };

  TileMap map(rows, cols, 0.6);
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto prev = loop[(i + n - 1) % n];
    const auto cur = loop[i];
    const auto next = loop[(i + 1) % n];
    const Heading in = heading_between(prev, cur);
    const Heading out = heading_between(cur, next);
    TileKind kind = TileKind::straight;
    if (out == left_of(in)) kind = TileKind::curve_left;
    else if (out == right_of(in)) kind = TileKind::curve_right;
    map.set(cur.first, cur.second, {kind, in});
  }
  validate_connectivity(map);
  return map;
}

double LanePolyline::segment_length(std::size_t i) const {
  const double end = i + 1 < points.size() ? cumulative[i + 1] : total_length;
  return end - cumulative[i];
}

double LanePolyline::wrap_s(double s) const {
  double w = std::fmod(s, total_length);
  if (w < 0.0) w += total_length;
  if (w >= total_length) w = 0.0;
  return w;
}

namespace {

std::size_t segment_index(const LanePolyline& p, double s) {
  auto it = std::upper_bound(p.cumulative.begin(), p.cumulative.end(), s);
  return static_cast<std::size_t>(std::distance(p.cumulative.begin(), it)) - 1;
}

} // namespace

Vec2 LanePolyline::point_at(double s) const {
  const double w = wrap_s(s);
  const std::size_t i = segment_index(*this, w);
  const double len = segment_length(i);
  const double t = len > 0.0 ? (w - cumulative[i]) / len : 0.0;
  const Vec2 a = segment_start(i);
  return a + (segment_end(i) - a) * t;
}

double LanePolyline::tangent_at(double s) const {
  const std::size_t i = segment_index(*this, wrap_s(s));
  const Vec2 d = segment_end(i) - segment_start(i);
  return std::atan2(d.y, d.x);
}

namespace {

// Appends the right-lane centerline samples of one tile, excluding the
// exit point (which is the next tile's entry point).
void append_tile_lane(const TileMap& map, int row, int col, std::vector<Vec2>& out) {
  const Tile& t = map.at(row, col);
  const LaneGeometry g = map.geometry();
  const double h = g.half_tile();
  const double q = g.lane_offset();
  const double ds = g.sample_spacing();
  const Vec2 center = map.tile_center(row, col);
  const double rot = heading_angle(t.orientation);
  auto to_world = [&](Vec2 local) { return center + rotate(local, rot); };

  if (t.kind == TileKind::straight) {
    const int n = static_cast<int>(std::ceil(map.tile_size() / ds - 1e-9));
    for (int k = 0; k < n; ++k) out.push_back(to_world({-h + map.tile_size() * k / n, -q}));
    return;
  }

  const bool left = t.kind == TileKind::curve_left;
  const Vec2 arc_center = left ? Vec2{-h, h} : Vec2{-h, -h};
  const double radius = left ? h + q : h - q;
  const double start = left ? -kPi / 2.0 : kPi / 2.0;
  const double sweep = left ? kPi / 2.0 : -kPi / 2.0;
  const int n = static_cast<int>(std::ceil(radius * kPi / 2.0 / ds - 1e-9));
  for (int k = 0; k < n; ++k) {
    const double a = start + sweep * k / n;
    out.push_back(to_world(arc_center + Vec2{radius * std::cos(a), radius * std::sin(a)}));
  }
}

} // namespace

LanePolyline lane_centerline(const TileMap& map) {
  int start_r = -1;
  int start_c = -1;
  for (int r = 0; r < map.rows() && start_r < 0; ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      if (is_drivable(map.at(r, c).kind)) {
        start_r = r;
        start_c = c;
        break;
      }
    }
  }
  if (start_r < 0) throw TopologyError("map has no drivable tiles");

  LanePolyline poly;
  poly.lane_half_width = map.geometry().lane_half_width();
  int r = start_r;
  int c = start_c;
  int visited = 0;
  const int limit = map.rows() * map.cols();
  do {
    const Tile& t = map.at(r, c);
    if (is_intersection(t.kind)) throw TopologyError("lane extraction does not support intersection tiles");
    append_tile_lane(map, r, c, poly.points);
    ++visited;
    const Heading out = exit_heading(t);
    auto [nr, nc] = step_cell(r, c, out);
    if (!map.in_bounds(nr, nc) || !is_drivable(map.at(nr, nc).kind))
      throw TopologyError("lane leaves the drivable network");
    const Tile& next = map.at(nr, nc);
    if (is_intersection(next.kind)) throw TopologyError("lane extraction does not support intersection tiles");
    if (next.orientation != out) throw TopologyError("lane enters a tile against its direction");
    r = nr;
    c = nc;
    if (visited > limit) throw TopologyError("lane does not close into a loop");
  } while (r != start_r || c != start_c);

  if (visited != map.drivable_count()) throw TopologyError("map has more than one lane loop");

  poly.cumulative.resize(poly.points.size());
  double s = 0.0;
  for (std::size_t i = 0; i < poly.points.size(); ++i) {
    poly.cumulative[i] = s;
    s += norm(poly.points[(i + 1) % poly.points.size()] - poly.points[i]);
  }
  poly.total_length = s;
  poly.closed = true;
  return poly;
}

namespace {

struct SegmentHit {
  double dist2;
  double s;
  double d;
  double tangent;
  std::size_t index;
};

SegmentHit project_on_segment(const LanePolyline& poly, std::size_t i, Vec2 p) {
  const Vec2 a = poly.segment_start(i);
  const Vec2 ab = poly.segment_end(i) - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 foot = t >= 1.0 ? poly.segment_end(i) : a + ab * t;
  const Vec2 off = p - foot;
  const double dist2 = dot(off, off);
  const double dist = std::sqrt(dist2);
  const double side = cross(ab, p - a);
  double s = poly.cumulative[i] + t * poly.segment_length(i);
  if (s >= poly.total_length) s -= poly.total_length;
  return {dist2, s, side < 0.0 ? -dist : dist, std::atan2(ab.y, ab.x), i};
}

bool better(const SegmentHit& a, const SegmentHit& b) {
  if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
  if (a.s != b.s) return a.s < b.s;
  return a.index < b.index;
}

LanePose to_pose(const SegmentHit& hit, double heading, double half_width) {
  return {hit.s, hit.d, wrap_angle(heading - hit.tangent), std::abs(hit.d) <= half_width};
}

} // namespace

LanePose project_to_lane(const LanePolyline& polyline, Vec2 position, double heading) {
  SegmentHit best{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0, 0};
  for (std::size_t i = 0; i < polyline.segment_count(); ++i) {
    const SegmentHit hit = project_on_segment(polyline, i, position);
    if (better(hit, best)) best = hit;
  }
  return to_pose(best, heading, polyline.lane_half_width);
}

LaneProjector::LaneProjector(LanePolyline polyline, double tile_size)
    : polyline_(std::move(polyline)), tile_size_(tile_size) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (Vec2 p : polyline_.points) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  origin_x_ = min_x - tile_size_;
  origin_y_ = min_y - tile_size_;
  bucket_cols_ = static_cast<int>((max_x - origin_x_) / tile_size_) + 2;
  bucket_rows_ = static_cast<int>((max_y - origin_y_) / tile_size_) + 2;
  buckets_.resize(static_cast<std::size_t>(bucket_cols_ * bucket_rows_));
  for (std::size_t i = 0; i < polyline_.segment_count(); ++i) {
    const Vec2 mid = (polyline_.segment_start(i) + polyline_.segment_end(i)) * 0.5;
    const int bx = static_cast<int>((mid.x - origin_x_) / tile_size_);
    const int by = static_cast<int>((mid.y - origin_y_) / tile_size_);
    buckets_[static_cast<std::size_t>(by * bucket_cols_ + bx)].push_back(static_cast<std::uint32_t>(i));
  }
}

LanePose LaneProjector::project(Vec2 position, double heading) const {
  // Segments are at most tile_size/20 long, so any segment bucketed outside
  // the 3x3 neighborhood lies farther than 0.9 tile from the query.
  const double fx = (position.x - origin_x_) / tile_size_;
  const double fy = (position.y - origin_y_) / tile_size_;
  if (fx >= 1.0 && fy >= 1.0 && fx < bucket_cols_ - 1 && fy < bucket_rows_ - 1) {
    const int bx = static_cast<int>(fx);
    const int by = static_cast<int>(fy);
    SegmentHit best{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0, 0};
    for (int y = by - 1; y <= by + 1; ++y) {
      for (int x = bx - 1; x <= bx + 1; ++x) {
        for (std::uint32_t i : buckets_[static_cast<std::size_t>(y * bucket_cols_ + x)]) {
          const SegmentHit hit = project_on_segment(polyline_, i, position);
          if (better(hit, best)) best = hit;
        }
      }
    }
    const double limit = 0.9 * tile_size_;
    if (best.dist2 <= limit * limit) return to_pose(best, heading, polyline_.lane_half_width);
  }
  return project_to_lane(polyline_, position, heading);
}

Zone classify_zone(const TileMap& map, const LanePose& pose, Vec2 position) {
  const auto cell = map.cell_at(position);
  if (!cell || !is_drivable(map.at(cell->first, cell->second).kind)) return Zone::off_road;
  return std::abs(pose.d) <= map.geometry().lane_half_width() ? Zone::right_lane : Zone::wrong_lane;
}

} // namespace aido::world

namespace aido::world {

namespace {

bool dashed(double along) {
  const double period = LaneGeometry::kDashLength + LaneGeometry::kDashGap;
  double phase = std::fmod(along, period);
  if (phase < 0.0) phase += period;
  return phase < LaneGeometry::kDashLength;
}

Marking straight_marking(Vec2 local, double h) {
  const double lateral = std::abs(local.y);
  if (lateral >= h - LaneGeometry::kWhiteWidth) return Marking::white;
  if (lateral <= LaneGeometry::kYellowWidth / 2.0 && dashed(local.x + h)) return Marking::yellow;
  return Marking::none;
}

// Local frame of a left curve: entry on the -x side heading +x, exit on the
// +y side; the road is the annulus of radii [0, 2h] about (-h, h).
Marking curve_marking(Vec2 local, double h) {
  const Vec2 rel = local - Vec2{-h, h};
  const double r = norm(rel);
  const double w = LaneGeometry::kWhiteWidth;
  if (r > 2.0 * h) return Marking::none;
  if (r >= 2.0 * h - w || r <= w) return Marking::white;
  if (std::abs(r - h) <= LaneGeometry::kYellowWidth / 2.0) {
    const double angle = std::atan2(rel.y, rel.x) + kPi / 2.0;
    if (dashed(h * angle)) return Marking::yellow;
  }
  return Marking::none;
}

Marking intersection_marking(const Tile& t, Vec2 local_world_aligned, double h) {
  const double w = LaneGeometry::kWhiteWidth;
  for (Heading side : {Heading::N, Heading::E, Heading::S, Heading::W}) {
    const Vec2 n = heading_vector(side);
    const double depth = dot(local_world_aligned, n);
    if (!is_open_side(t, side)) {
      if (depth >= h - w) return Marking::white;
      continue;
    }
    // Stop line across the lane that enters through this side.
    const Vec2 incoming = -n;
    const Vec2 right{incoming.y, -incoming.x};
    const double lateral = dot(local_world_aligned, right);
    if (depth >= h - 0.012 - LaneGeometry::kStopLineDepth && depth <= h - 0.012 && lateral >= 0.012 &&
        lateral <= h - w)
      return Marking::red;
  }
  return Marking::none;
}

} // namespace

Marking marking_at(const TileMap& map, Vec2 position) {
  const auto cell = map.cell_at(position);
  if (!cell) return Marking::none;
  const Tile& t = map.at(cell->first, cell->second);
  if (!is_drivable(t.kind)) return Marking::none;
  const double h = map.geometry().half_tile();
  const Vec2 offset = position - map.tile_center(cell->first, cell->second);
  if (is_intersection(t.kind)) return intersection_marking(t, offset, h);

  Vec2 local = rotate(offset, -heading_angle(t.orientation));
  switch (t.kind) {
  case TileKind::straight: return straight_marking(local, h);
  case TileKind::curve_left: return curve_marking(local, h);
  case TileKind::curve_right: return curve_marking({local.x, -local.y}, h);
  default: return Marking::none;
  }
}

} // namespace aido::world
