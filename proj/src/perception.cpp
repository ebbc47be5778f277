#include "aido/perception.hpp"

#include "aido/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aido::perception {

using sim::Label;

int BinaryImage::count() const { return static_cast<int>(std::count(cells.begin(), cells.end(), 1)); }

GrayImage to_gray(const sim::SemanticImage& img) {
  GrayImage g{img.width, img.height, {}};
  g.cells.reserve(img.labels.size());
  for (Label l : img.labels) {
    const int v = kLabelGray[static_cast<std::size_t>(l)] + img.intensity_shift;
    g.cells.push_back(static_cast<std::uint8_t>(std::clamp(v, 0, 255)));
  }
  return g;
}

Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (std::uint8_t v : img.cells) ++h[v];
  return h;
}

int otsu_threshold(const Histogram& hist) {
  __extension__ typedef __int128 i128;
  __extension__ typedef unsigned __int128 u128;
  std::int64_t n = 0;
  std::int64_t sum = 0;
  for (int i = 0; i < 256; ++i) {
    n += static_cast<std::int64_t>(hist[static_cast<std::size_t>(i)]);
    sum += i * static_cast<std::int64_t>(hist[static_cast<std::size_t>(i)]);
  }
  if (n == 0) throw ValidationError("otsu threshold of an empty histogram");
  if (n > (std::int64_t{1} << 24)) throw ValidationError("histogram exceeds 2^24 samples");

  // Between-class variance is proportional to (n1 S0 - n0 S1)^2 / (n0 n1).
  // Compare quotients, then remainders, so the argmax is exact.
  int best_t = 0;
  u128 best_q = 0;
  u128 best_r = 0;
  u128 best_den = 1;
  std::int64_t n0 = 0;
  std::int64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += static_cast<std::int64_t>(hist[static_cast<std::size_t>(t)]);
    s0 += t * static_cast<std::int64_t>(hist[static_cast<std::size_t>(t)]);
    const std::int64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 a = static_cast<i128>(n1) * s0 - static_cast<i128>(n0) * (sum - s0);
    const u128 num = static_cast<u128>(a < 0 ? -a : a) * static_cast<u128>(a < 0 ? -a : a);
    const u128 den = static_cast<u128>(n0) * static_cast<u128>(n1);
    const u128 q = num / den;
    const u128 r = num % den;
    if (q > best_q || (q == best_q && r * best_den > best_r * den)) {
      best_t = t;
      best_q = q;
      best_r = r;
      best_den = den;
    }
  }
  return best_t;
}

BinaryImage binarize(const GrayImage& img, int t) {
  BinaryImage b(img.width, img.height);
  for (std::size_t i = 0; i < img.cells.size(); ++i) b.cells[i] = img.cells[i] > t ? 1 : 0;
  return b;
}

BinaryImage morphology(const BinaryImage& img, MorphOp op) {
  BinaryImage out(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      bool all = true;
      bool any = false;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          const bool v = rr >= 0 && cc >= 0 && rr < img.height && cc < img.width && img.at(rr, cc);
          all = all && v;
          any = any || v;
        }
      }
      out.set(r, c, op == MorphOp::erode ? all : any);
    }
  }
  return out;
}

BinaryImage opening(const BinaryImage& img) { return morphology(morphology(img, MorphOp::erode), MorphOp::dilate); }

BinaryImage color_filter(const sim::SemanticImage& img) {
  BinaryImage b(img.width, img.height);
  for (std::size_t i = 0; i < img.labels.size(); ++i)
    b.cells[i] = img.labels[i] == Label::white || img.labels[i] == Label::yellow;
  return b;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

} // namespace

ComponentLabeling connected_components(const BinaryImage& img, const GrayImage& source) {
  if (img.width != source.width || img.height != source.height)
    throw DimensionError("binary and source images differ in size");
  const int w = img.width;
  const int h = img.height;
  ComponentLabeling out;
  out.width = w;
  out.height = h;
  out.labels.assign(static_cast<std::size_t>(w * h), 0);

  // First pass: provisional labels joined through a union-find forest.
  std::vector<int> parent{0};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.at(r, c)) continue;
      const int up = r > 0 ? out.at(r - 1, c) : 0;
      const int left = c > 0 ? out.at(r, c - 1) : 0;
      int label = 0;
      if (up == 0 && left == 0) {
        label = static_cast<int>(parent.size());
        parent.push_back(label);
      } else if (up != 0 && left != 0) {
        const int a = find_root(parent, up);
        const int b = find_root(parent, left);
        label = std::min(a, b);
        parent[static_cast<std::size_t>(std::max(a, b))] = label;
      } else {
        label = up != 0 ? up : left;
      }
      out.labels[static_cast<std::size_t>(r * w + c)] = label;
    }
  }

  // Second pass: dense ids in order of each component's first cell.
  std::vector<int> final_id(parent.size(), 0);
  std::vector<double> sum_r;
  std::vector<double> sum_c;
  std::vector<double> sum_g;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int& cell = out.labels[static_cast<std::size_t>(r * w + c)];
      if (cell == 0) continue;
      const int root = find_root(parent, cell);
      if (final_id[static_cast<std::size_t>(root)] == 0) {
        final_id[static_cast<std::size_t>(root)] = ++out.count;
        out.components.emplace_back();
        sum_r.push_back(0.0);
        sum_c.push_back(0.0);
        sum_g.push_back(0.0);
      }
      cell = final_id[static_cast<std::size_t>(root)];
      const auto k = static_cast<std::size_t>(cell - 1);
      ++out.components[k].area;
      sum_r[k] += r;
      sum_c[k] += c;
      sum_g[k] += source.at(r, c);
    }
  }
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    auto& comp = out.components[k];
    comp.centroid_row = sum_r[k] / comp.area;
    comp.centroid_col = sum_c[k] / comp.area;
    comp.mean_gray = sum_g[k] / comp.area;
  }

  if (!source.cells.empty()) {
    std::vector<std::uint8_t> sorted = source.cells;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    out.frame_shift = static_cast<double>(*mid) - kLabelGray[0];
  }
  return out;
}

ComponentLabeling connected_components(const BinaryImage& img, const sim::SemanticImage& source) {
  return connected_components(img, to_gray(source));
}

std::vector<ColorClass> classify_components(const ComponentLabeling& labeling) {
  constexpr double kWhite = kLabelGray[1];
  constexpr double kYellow = kLabelGray[2];
  constexpr double kRadius = 25.0;
  std::vector<ColorClass> out;
  out.reserve(labeling.components.size());
  for (const auto& comp : labeling.components) {
    const double g = comp.mean_gray - labeling.frame_shift;
    const double dw = std::abs(g - kWhite);
    const double dy = std::abs(g - kYellow);
    if (std::min(dw, dy) >= kRadius) out.push_back(ColorClass::other);
    else out.push_back(dw <= dy ? ColorClass::white : ColorClass::yellow);
  }
  return out;
}

std::optional<Line> fit_line(const std::vector<Vec2>& points) {
  if (points.size() < 2) return std::nullopt;
  Vec2 mean{0.0, 0.0};
  for (Vec2 p : points) mean = mean + p;
  mean = mean * (1.0 / static_cast<double>(points.size()));
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (Vec2 p : points) {
    const Vec2 d = p - mean;
    sxx += d.x * d.x;
    syy += d.y * d.y;
    sxy += d.x * d.y;
  }
  if (sxx + syy == 0.0) return std::nullopt;
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir = unit_from_angle(angle);
  if (dir.y < 0.0 || (dir.y == 0.0 && dir.x < 0.0)) dir = -dir;
  return Line{mean, dir};
}

LineFit fit_lines(const std::vector<Vec2>& yellow_points, const std::vector<Vec2>& white_points) {
  LineFit fit;
  fit.yellow = fit_line(yellow_points);
  fit.white = fit_line(white_points);
  fit.yellow_visible = fit.yellow.has_value();
  fit.white_visible = fit.white.has_value();

  Vec2 mid{0.0, 0.0};
  if (fit.yellow) mid = mid + fit.yellow->direction;
  if (fit.white) mid = mid + fit.white->direction;
  if (norm(mid) > 0.0) fit.deviation_angle = std::atan2(-mid.x, mid.y);

  if (fit.yellow && fit.white) {
    const Vec2 d1 = fit.yellow->direction;
    const Vec2 d2 = fit.white->direction;
    const double den = cross(d1, d2);
    if (std::abs(den) > 1e-12) {
      const double a = cross(fit.white->point - fit.yellow->point, d2) / den;
      fit.intersection = fit.yellow->point + d1 * a;
    }
  }
  return fit;
}

namespace {

// Center column of the run of `cls` cells in `row` nearest `ref`, keeping
// only runs on the `side` of it (+1 right, -1 left, 0 either). Returns -1
// when there is none.
double nearest_run(const ComponentLabeling& lab, const std::vector<ColorClass>& classes, int row, ColorClass cls,
                   double ref, int side) {
  auto is_cls = [&](int c) {
    const int id = lab.at(row, c);
    return id > 0 && classes[static_cast<std::size_t>(id - 1)] == cls;
  };
  double best = -1.0;
  double best_dist = 0.0;
  for (int c = 0; c < lab.width;) {
    if (!is_cls(c)) {
      ++c;
      continue;
    }
    const int start = c;
    while (c < lab.width && is_cls(c)) ++c;
    const double mid = (start + c - 1) / 2.0;
    if (side * (mid - ref) < 0.0 || (side != 0 && mid == ref)) continue;
    const double dist = std::abs(mid - ref);
    if (best < 0.0 || dist < best_dist) {
      best = mid;
      best_dist = dist;
    }
  }
  return best;
}

} // namespace

LineFit fit_midline(const ComponentLabeling& labeling, const std::vector<ColorClass>& classes,
                    const sim::RasterConfig& raster, const MidlineOptions& options) {
  if (labeling.width != raster.cols || labeling.height != raster.rows)
    throw DimensionError("labeling does not match the raster");
  if (classes.size() != static_cast<std::size_t>(labeling.count))
    throw DimensionError("one class per component is required");
  auto to_metric = [&](int row, double col) {
    return Vec2{raster.width_m * ((col + 0.5) / raster.cols - 0.5),
                raster.depth_m * (raster.rows - row - 0.5) / raster.rows};
  };
  auto to_col = [&](double x) { return (x / raster.width_m + 0.5) * raster.cols - 0.5; };
  const double center = (raster.cols - 1) / 2.0;
  const int first_row = static_cast<int>(std::floor(options.crop_fraction * raster.rows));

  std::vector<Vec2> yellow;
  for (int r = first_row; r < raster.rows; ++r) {
    const double y = nearest_run(labeling, classes, r, ColorClass::yellow, center, 0);
    if (y >= 0.0) yellow.push_back(to_metric(r, y));
  }
  const auto yellow_line = fit_line(yellow);

  // The lane's white edge is the one across the yellow line from the
  // robot; without a yellow line take the white run nearest the center.
  auto yellow_col = [&](int row) {
    const Vec2 p = yellow_line->point;
    const Vec2 d = yellow_line->direction;
    const double y = to_metric(row, 0.0).y;
    return to_col(p.x + (y - p.y) * d.x / d.y);
  };
  const bool guided = yellow_line && std::abs(yellow_line->direction.y) > 1e-9;
  int side = 0;
  if (guided) {
    const double bottom = yellow_col(raster.rows - 1);
    side = center > bottom ? 1 : (center < bottom ? -1 : 0);
  }
  std::vector<Vec2> white;
  for (int r = first_row; r < raster.rows; ++r) {
    const double w = guided && side != 0 ? nearest_run(labeling, classes, r, ColorClass::white, yellow_col(r), side)
                                         : nearest_run(labeling, classes, r, ColorClass::white, center, 0);
    if (w >= 0.0) white.push_back(to_metric(r, w));
  }
  return fit_lines(yellow, white);
}

namespace {

std::optional<double> x_at_robot(const std::optional<Line>& line) {
  if (!line || std::abs(line->direction.y) < 1e-9) return std::nullopt;
  return line->point.x - line->point.y * line->direction.x / line->direction.y;
}

} // namespace

std::optional<double> estimate_lane_error(const LineFit& fit, double lane_offset) {
  const auto y = x_at_robot(fit.yellow);
  const auto w = x_at_robot(fit.white);
  double center = 0.0;
  if (y && w) center = (*y + *w) / 2.0;
  else if (y) center = *y + lane_offset;
  else if (w) center = *w - lane_offset;
  else return std::nullopt;
  return -center;
}

Perception process_frame(const sim::SemanticImage& img, const sim::RasterConfig& raster,
                         const PipelineOptions& options) {
  Perception p;
  const GrayImage gray = to_gray(img);
  BinaryImage bin;
  if (options.color_prefilter) {
    bin = color_filter(img);
  } else {
    p.threshold = otsu_threshold(histogram(gray));
    bin = binarize(gray, p.threshold);
  }
  if (options.opening) bin = opening(bin);
  const ComponentLabeling lab = connected_components(bin, gray);
  p.fit = fit_midline(lab, classify_components(lab), raster, options.midline);
  p.lane_error = estimate_lane_error(p.fit);
  return p;
}

} // namespace aido::perception
