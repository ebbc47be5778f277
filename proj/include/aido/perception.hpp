#pragma once

#include "aido/geometry.hpp"
#include "aido/sim.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace aido::perception {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // row-major

  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row * width + col)]; }
  bool operator==(const GrayImage&) const = default;
};

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // 0 or 1, row-major

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w * h), 0) {}

  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row * width + col)]; }
  void set(int row, int col, bool v) { cells[static_cast<std::size_t>(row * width + col)] = v ? 1 : 0; }
  int count() const;
  bool operator==(const BinaryImage&) const = default;
};

/// Label gray levels before the lighting shift.
inline constexpr std::array<int, 5> kLabelGray{20, 230, 180, 140, 90};

GrayImage to_gray(const sim::SemanticImage& img);

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const GrayImage& img);

/// Threshold maximizing the between-class variance of {<= t} and {> t}.
/// Exact integer arithmetic; ties resolve to the smallest t. Throws
/// ValidationError for an empty histogram or more than 2^24 samples.
int otsu_threshold(const Histogram& hist);

/// Cells strictly above t become 1.
BinaryImage binarize(const GrayImage& img, int t);

enum class MorphOp { erode, dilate };

/// 3x3 full structuring element; neighbors outside the image count as 0.
BinaryImage morphology(const BinaryImage& img, MorphOp op);
BinaryImage opening(const BinaryImage& img);

/// Cells whose label is a lane marking color (white or yellow).
BinaryImage color_filter(const sim::SemanticImage& img);

struct Component {
  int area = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  double mean_gray = 0.0;
};

struct ComponentLabeling {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // 0 = background, otherwise 1..count
  int count = 0;
  std::vector<Component> components;  // components[id - 1]
  double frame_shift = 0.0;           // median source gray minus the background level

  int at(int row, int col) const { return labels[static_cast<std::size_t>(row * width + col)]; }
};

/// 4-connected components, numbered in raster-scan discovery order. Throws
/// DimensionError when the images differ in size.
ComponentLabeling connected_components(const BinaryImage& img, const GrayImage& source);
ComponentLabeling connected_components(const BinaryImage& img, const sim::SemanticImage& source);

enum class ColorClass { white, yellow, other };

/// Nearest reference color after removing the frame shift; anything at 25
/// gray levels or more from both references is `other`.
std::vector<ColorClass> classify_components(const ComponentLabeling& labeling);

/// Line through `point` along unit `direction`, in ego metric coordinates
/// (x to the right, y forward). Directions always point forward.
struct Line {
  Vec2 point;
  Vec2 direction;
};

struct LineFit {
  std::optional<Line> yellow;
  std::optional<Line> white;
  std::optional<Vec2> intersection;
  double deviation_angle = 0.0;  // midline from vertical, positive leaning left
  bool yellow_visible = false;
  bool white_visible = false;

  bool valid() const { return yellow_visible || white_visible; }
};

/// Total least squares line; needs two or more distinct points.
std::optional<Line> fit_line(const std::vector<Vec2>& points);

LineFit fit_lines(const std::vector<Vec2>& yellow_points, const std::vector<Vec2>& white_points);

struct MidlineOptions {
  double crop_fraction = 0.25;  // rows removed from the top (far) edge
};

/// Per-row midpoints of the yellow and white runs nearest the image center,
/// fitted per class.
LineFit fit_midline(const ComponentLabeling& labeling, const std::vector<ColorClass>& classes,
                    const sim::RasterConfig& raster, const MidlineOptions& options = {});

/// Signed lateral error in meters: positive when the lane center lies to
/// the left of the robot. `lane_offset` is the nominal distance from each
/// line to the lane center, used when only one line is visible.
std::optional<double> estimate_lane_error(const LineFit& fit, double lane_offset = 0.15);

struct PipelineOptions {
  bool opening = true;
  bool color_prefilter = false;  // replace Otsu binarization with the label color mask
  MidlineOptions midline;
};

struct Perception {
  int threshold = 0;
  LineFit fit;
  std::optional<double> lane_error;
};

/// Gray conversion, Otsu binarization, optional opening, components,
/// classification and line fitting.
Perception process_frame(const sim::SemanticImage& img, const sim::RasterConfig& raster,
                         const PipelineOptions& options = {});

} // namespace aido::perception
