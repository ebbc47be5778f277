#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aido/error.hpp"
#include "aido/perception.hpp"
#include "oracles.hpp"

#include <cmath>
#include <algorithm>

using namespace aido;
using namespace aido::perception;
using sim::Label;
using sim::RasterConfig;
using sim::SemanticImage;

namespace {

BinaryImage random_binary(Rng& rng, int w, int h) {
  BinaryImage b(w, h);
  const double p = rng.uniform(0.2, 0.7);
  for (auto& v : b.cells) v = rng.unit() < p;
  return b;
}

GrayImage flat_gray(int w, int h, std::uint8_t v) {
  return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h), v)};
}

BinaryImage transpose(const BinaryImage& b) {
  BinaryImage t(b.height, b.width);
  for (int r = 0; r < b.height; ++r)
    for (int c = 0; c < b.width; ++c) t.set(c, r, b.at(r, c));
  return t;
}

SemanticImage mirror(const SemanticImage& img) {
  SemanticImage m = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      m.labels[static_cast<std::size_t>(r * img.width + c)] = img.at(r, img.width - 1 - c);
  return m;
}

SemanticImage view(double d, double phi, const RasterConfig& raster = {}) {
  // Bottom straight of a long ring runs east with its right lane at y=0.15.
  const world::TileMap m = oracle::ring(3, 8);
  return sim::render_semantic(m, {}, {1.5, 0.15 + d, phi, 0.0}, raster);
}

Perception run(const SemanticImage& img, const RasterConfig& raster = {}, bool open = false) {
  PipelineOptions o;
  o.opening = open;
  return process_frame(img, raster, o);
}

std::vector<Vec2> points_along(Vec2 origin, double angle, int n) {
  std::vector<Vec2> out;
  const Vec2 dir{-std::sin(angle), std::cos(angle)};
  for (int i = 0; i < n; ++i) out.push_back(origin + dir * (0.1 * i));
  return out;
}

} // namespace

TEST_CASE("gray mapping and lighting shift") {
  SemanticImage img{5, 1, {Label::background, Label::white, Label::yellow, Label::red, Label::obstacle}, 0};
  CHECK(to_gray(img).cells == std::vector<std::uint8_t>{20, 230, 180, 140, 90});
  img.intensity_shift = 40;
  CHECK(to_gray(img).cells == std::vector<std::uint8_t>{60, 255, 220, 180, 130});
  img.intensity_shift = -30;
  CHECK(to_gray(img).cells == std::vector<std::uint8_t>{0, 200, 150, 110, 60});
}

TEST_CASE("otsu examples") {
  Histogram h{};
  h[10] = 100;
  h[200] = 100;
  CHECK(otsu_threshold(h) == 10);
  Histogram flat{};
  flat[77] = 50;
  CHECK(otsu_threshold(flat) == 0);
  CHECK_THROWS_AS(otsu_threshold(Histogram{}), ValidationError);
  Histogram huge{};
  huge[0] = (1u << 24) + 1;
  CHECK_THROWS_AS(otsu_threshold(huge), ValidationError);
}

TEST_CASE("otsu matches the exhaustive rational search") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const Histogram h = oracle::random_histogram(rng);
    CHECK(otsu_threshold(h) == oracle::otsu_exhaustive(h));
  }
}

TEST_CASE("otsu is invariant to histogram scaling") {
  Rng rng(32);
  for (int i = 0; i < 50; ++i) {
    const Histogram h = oracle::random_histogram(rng);
    Histogram scaled = h;
    const std::uint64_t k = 2 + rng.below(20);
    for (auto& v : scaled) v *= k;
    CHECK(otsu_threshold(scaled) == otsu_threshold(h));
  }
}

TEST_CASE("otsu separates background from markings") {
  const Perception p = run(view(0.0, 0.0));
  CHECK(p.threshold >= 20);
  CHECK(p.threshold < 180);
}

TEST_CASE("morphology border rules") {
  BinaryImage full(5, 5);
  for (auto& v : full.cells) v = 1;
  const BinaryImage e = morphology(full, MorphOp::erode);
  CHECK(e.count() == 9);
  for (int r = 1; r <= 3; ++r)
    for (int c = 1; c <= 3; ++c) CHECK(e.at(r, c) == 1);

  BinaryImage dot(5, 5);
  dot.set(2, 2, true);
  CHECK(morphology(dot, MorphOp::dilate).count() == 9);
  BinaryImage corner(5, 5);
  corner.set(0, 0, true);
  CHECK(morphology(corner, MorphOp::dilate).count() == 4);
}

TEST_CASE("erosion and dilation bracket the image") {
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    const BinaryImage img = random_binary(rng, 16, 16);
    const BinaryImage e = morphology(img, MorphOp::erode);
    const BinaryImage d = morphology(img, MorphOp::dilate);
    const BinaryImage o = opening(img);
    for (std::size_t k = 0; k < img.cells.size(); ++k) {
      CHECK(e.cells[k] <= img.cells[k]);
      CHECK(img.cells[k] <= d.cells[k]);
      CHECK(o.cells[k] <= img.cells[k]);
    }
  }
}

TEST_CASE("connected component examples") {
  BinaryImage img(6, 6);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      img.set(r, c, true);
      img.set(r + 3, c + 3, true);
    }
  const auto lab = connected_components(img, flat_gray(6, 6, 200));
  CHECK(lab.count == 2);
  CHECK(lab.components[0].area == 4);
  CHECK(lab.components[1].area == 4);
  CHECK(lab.components[1].centroid_row == doctest::Approx(3.5));
  CHECK(lab.components[0].mean_gray == doctest::Approx(200));

  BinaryImage diag(3, 3);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  diag.set(2, 2, true);
  CHECK(connected_components(diag, flat_gray(3, 3, 0)).count == 3);

  CHECK_THROWS_AS(connected_components(diag, flat_gray(4, 3, 0)), DimensionError);
}

TEST_CASE("u-shaped component merges in the second pass") {
  BinaryImage u(5, 3);
  for (int r = 0; r < 3; ++r) {
    u.set(r, 0, true);
    u.set(r, 4, true);
  }
  for (int c = 0; c < 5; ++c) u.set(2, c, true);
  const auto lab = connected_components(u, flat_gray(5, 3, 0));
  CHECK(lab.count == 1);
  CHECK(lab.components[0].area == 9);
}

TEST_CASE("connected components match the flood fill oracle") {
  Rng rng(34);
  for (int i = 0; i < 200; ++i) {
    const BinaryImage img = random_binary(rng, 16, 16);
    const auto lab = connected_components(img, flat_gray(16, 16, 100));
    const auto ref = oracle::flood_fill(16, 16, img.cells);
    CHECK(lab.labels == ref);
    int area = 0;
    for (const auto& comp : lab.components) area += comp.area;
    CHECK(area == img.count());
    CHECK(lab.count == *std::max_element(ref.begin(), ref.end()));
  }
}

TEST_CASE("component count is invariant under transposition") {
  Rng rng(35);
  for (int i = 0; i < 100; ++i) {
    const BinaryImage img = random_binary(rng, 16, 11);
    CHECK(connected_components(img, flat_gray(16, 11, 0)).count ==
          connected_components(transpose(img), flat_gray(11, 16, 0)).count);
  }
}

TEST_CASE("component classification") {
  SemanticImage img{8, 4, std::vector<Label>(32, Label::background), 0};
  for (int c = 0; c < 2; ++c) img.labels[static_cast<std::size_t>(c + 8)] = Label::white;
  for (int c = 4; c < 6; ++c) img.labels[static_cast<std::size_t>(c + 8)] = Label::yellow;
  // a mixed block: two white and two yellow cells
  img.labels[24] = Label::white;
  img.labels[25] = Label::yellow;
  img.labels[26] = Label::white;
  img.labels[27] = Label::yellow;

  for (int shift : {0, 40, -15}) {
    img.intensity_shift = shift;
    const auto lab = connected_components(color_filter(img), img);
    REQUIRE(lab.count == 3);
    CHECK(lab.frame_shift == doctest::Approx(shift));
    const auto cls = classify_components(lab);
    CHECK(cls[0] == ColorClass::white);
    CHECK(cls[1] == ColorClass::yellow);
    // saturation at 255 skews the mixed mean when brightened
    if (shift <= 0) CHECK(cls[2] == ColorClass::other);
  }
}

TEST_CASE("line fits from exact points") {
  const LineFit straight = fit_lines(points_along({-0.15, 0.0}, 0.0, 10), points_along({0.15, 0.0}, 0.0, 10));
  CHECK(straight.yellow_visible);
  CHECK(straight.white_visible);
  CHECK(std::abs(straight.deviation_angle) < 1e-12);
  CHECK_FALSE(straight.intersection);

  const double ten = 10.0 * kPi / 180.0;
  const LineFit tilted = fit_lines(points_along({-0.15, 0.0}, ten, 10), points_along({0.15, 0.0}, ten, 10));
  CHECK(std::abs(tilted.deviation_angle - ten) < 1e-9);

  const LineFit converging = fit_lines(points_along({-0.15, 0.0}, -0.1, 10), points_along({0.15, 0.0}, 0.1, 10));
  REQUIRE(converging.intersection);
  CHECK(std::abs(converging.intersection->x) < 1e-9);
  CHECK(std::abs(converging.deviation_angle) < 1e-12);

  const LineFit one = fit_lines({{0.0, 0.0}}, {});
  CHECK_FALSE(one.valid());
  CHECK_FALSE(estimate_lane_error(one));
}

TEST_CASE("render and fit: heading error") {
  for (double phi : {0.2, -0.2, 0.1}) {
    const Perception p = run(view(0.0, phi));
    REQUIRE(p.fit.yellow_visible);
    REQUIRE(p.fit.white_visible);
    CHECK(std::abs(p.fit.deviation_angle + phi) < 0.05);
  }
}

TEST_CASE("render and fit: lateral error") {
  const Perception centered = run(view(0.0, 0.0));
  REQUIRE(centered.lane_error);
  CHECK(std::abs(*centered.lane_error) < 0.02);

  const Perception left = run(view(0.05, 0.0));
  REQUIRE(left.lane_error);
  CHECK(std::abs(*left.lane_error + 0.05) < 0.02);

  const Perception right = run(view(-0.04, 0.0));
  REQUIRE(right.lane_error);
  CHECK(std::abs(*right.lane_error - 0.04) < 0.02);
}

TEST_CASE("blank raster has no estimate") {
  const RasterConfig raster;
  const SemanticImage blank{raster.cols, raster.rows,
                            std::vector<Label>(static_cast<std::size_t>(raster.cols * raster.rows), Label::background), 0};
  const Perception p = run(blank);
  CHECK_FALSE(p.fit.valid());
  CHECK_FALSE(p.lane_error);
}

TEST_CASE("deviation angle is odd under mirroring") {
  for (double phi : {0.15, -0.25}) {
    const SemanticImage img = view(0.02, phi);
    const Perception a = run(img);
    const Perception b = run(mirror(img));
    REQUIRE(a.fit.valid());
    REQUIRE(b.fit.valid());
    CHECK(std::abs(a.fit.deviation_angle + b.fit.deviation_angle) < 1e-9);
  }
}

TEST_CASE("lighting shift does not change the estimate") {
  SemanticImage img = view(0.03, 0.1);
  const Perception base = run(img);
  for (int shift : {-20, 25, 40}) {
    img.intensity_shift = shift;
    const Perception p = run(img);
    REQUIRE(p.lane_error);
    CHECK(*p.lane_error == doctest::Approx(*base.lane_error));
    CHECK(p.fit.deviation_angle == doctest::Approx(base.fit.deviation_angle));
  }
}

TEST_CASE("opening erases thin lines at the coarse raster") {
  const RasterConfig coarse;
  CHECK_FALSE(run(view(0.0, 0.0, coarse), coarse, true).fit.valid());

  RasterConfig fine;
  fine.cols = 192;
  fine.rows = 144;
  const Perception p = run(view(0.0, 0.1, fine), fine, true);
  REQUIRE(p.fit.valid());
  CHECK(std::abs(p.fit.deviation_angle + 0.1) < 0.05);
  REQUIRE(p.lane_error);
  CHECK(std::abs(*p.lane_error) < 0.02);
}

TEST_CASE("color prefilter pipeline") {
  PipelineOptions o;
  o.opening = false;
  o.color_prefilter = true;
  const Perception p = process_frame(view(0.0, -0.1), RasterConfig{}, o);
  REQUIRE(p.fit.valid());
  CHECK(std::abs(p.fit.deviation_angle - 0.1) < 0.05);
}
