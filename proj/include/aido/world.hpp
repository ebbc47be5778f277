#pragma once

#include "aido/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aido::world {

enum class TileKind { straight, curve_left, curve_right, three_way, four_way, empty };

/// Compass heading. For straights and curves a tile's orientation is the
/// heading with which its right lane enters the tile. A three-way tile is
/// open on its orientation side and both sides perpendicular to it.
enum class Heading { N, E, S, W };

Heading left_of(Heading h);
Heading right_of(Heading h);
Heading opposite(Heading h);
double heading_angle(Heading h);
Vec2 heading_vector(Heading h);

struct Tile {
  TileKind kind = TileKind::empty;
  Heading orientation = Heading::N;

  bool operator==(const Tile&) const = default;
};

bool is_drivable(TileKind k);
bool is_intersection(TileKind k);

/// Exit heading of a straight or curve tile.
Heading exit_heading(const Tile& t);

/// Whether an intersection tile has a lane opening on side `side`.
bool is_open_side(const Tile& t, Heading side);

std::string_view to_string(TileKind k);
std::string_view to_string(Heading h);

/// Lane-geometry constants derived from the tile size.
struct LaneGeometry {
  double tile_size = 0.6;

  double half_tile() const { return tile_size / 2.0; }
  double lane_offset() const { return tile_size / 4.0; }
  double lane_half_width() const { return tile_size / 8.0; }
  double sample_spacing() const { return tile_size / 20.0; }

  static constexpr double kWhiteWidth = 0.024;
  static constexpr double kYellowWidth = 0.024;
  static constexpr double kDashLength = 0.06;
  static constexpr double kDashGap = 0.06;
  static constexpr double kStopLineDepth = 0.048;
};

class TileMap {
public:
  TileMap(int rows, int cols, double tile_size);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double tile_size() const { return tile_size_; }
  LaneGeometry geometry() const { return {tile_size_}; }

  const Tile& at(int row, int col) const;
  void set(int row, int col, Tile t);
  bool in_bounds(int row, int col) const { return row >= 0 && col >= 0 && row < rows_ && col < cols_; }

  /// Tile cell containing a world position, if inside the grid. Row 0 is
  /// the north edge; world y grows northward.
  std::optional<std::pair<int, int>> cell_at(Vec2 p) const;
  Vec2 tile_center(int row, int col) const;
  double width() const { return cols_ * tile_size_; }
  double height() const { return rows_ * tile_size_; }

  int drivable_count() const;

  bool operator==(const TileMap&) const = default;

private:
  int rows_;
  int cols_;
  double tile_size_;
  std::vector<Tile> grid_;
};

/// Neighbor cell in the given heading.
std::pair<int, int> step_cell(int row, int col, Heading h);

/// Parses and validates a map document.
TileMap load_map(std::string_view document);

/// Parses a map document without the lane-connectivity check.
TileMap parse_map(std::string_view document);

/// Canonical map document; load_map(serialize_map(m)) == m.
std::string serialize_map(const TileMap& map);

/// Throws ValidationError when some lane exit or entry is dangling.
void validate_connectivity(const TileMap& map);

TileMap generate_random_map(std::uint64_t seed, int rows, int cols);

/// The same road network with every lane direction reversed: the right
/// lane of the result is the left lane of the input.
TileMap reverse_map(const TileMap& map);

/// The canonical 3x3 ring used throughout the tests.
std::string canonical_ring_document();

struct LanePolyline {
  std::vector<Vec2> points;
  std::vector<double> cumulative;  // arclength at each point
  double total_length = 0.0;       // includes the closing segment when closed
  bool closed = true;
  double lane_half_width = 0.075;

  std::size_t segment_count() const { return closed ? points.size() : points.size() - 1; }
  Vec2 segment_start(std::size_t i) const { return points[i]; }
  Vec2 segment_end(std::size_t i) const { return points[(i + 1) % points.size()]; }
  double segment_length(std::size_t i) const;

  /// Point and tangent angle at arclength s (wrapped onto the loop).
  Vec2 point_at(double s) const;
  double tangent_at(double s) const;
  double wrap_s(double s) const;
};

LanePolyline lane_centerline(const TileMap& map);

struct LanePose {
  double s = 0.0;
  double d = 0.0;
  double phi = 0.0;
  bool in_right_lane = true;

  bool operator==(const LanePose&) const = default;
};

/// Nearest-segment projection accelerated with a per-tile bucket index.
class LaneProjector {
public:
  LaneProjector(LanePolyline polyline, double tile_size);

  LanePose project(Vec2 position, double heading) const;
  const LanePolyline& polyline() const { return polyline_; }

private:
  LanePolyline polyline_;
  double tile_size_;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  int bucket_cols_ = 0;
  int bucket_rows_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

LanePose project_to_lane(const LanePolyline& polyline, Vec2 position, double heading);

enum class Marking { none, white, yellow, red };

/// Painted marking at a world position: white road edges, dashed yellow
/// center line, red stop lines at intersection entries.
Marking marking_at(const TileMap& map, Vec2 position);

enum class Zone { right_lane, wrong_lane, off_road };

std::string_view to_string(Zone z);

Zone classify_zone(const TileMap& map, const LanePose& pose, Vec2 position);

} // namespace aido::world
