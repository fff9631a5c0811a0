#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "tracekit/metrics.hpp"
#include "tracekit/rasterizer.hpp"
#include "tracekit/tracer.hpp"

namespace tracekit {
namespace {

Bitmap bitmap_of(const std::vector<std::string>& rows) {
  Bitmap b(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x) b.set(x, y, rows[y][x] == '#');
  return b;
}

TraceParams exact() {
  TraceParams p;
  p.turdsize = 0;
  return p;
}

PathLoop loop_of(const std::vector<std::string>& rows) {
  auto loops = decompose_paths(bitmap_of(rows), exact());
  EXPECT_EQ(loops.size(), 1u);
  return loops.at(0);
}

void expect_unit_steps_and_closed(const PathLoop& l) {
  const auto& v = l.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto a = v[i], b = v[(i + 1) % v.size()];
    EXPECT_EQ(std::abs(a.x - b.x) + std::abs(a.y - b.y), 1);
  }
}

TEST(Params, Validation) {
  TraceParams p;
  EXPECT_NO_THROW(p.validate());
  p.turdsize = -1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.alphamax = -0.1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.opttolerance = 0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_EQ(turn_policy_from_string("minority"), TurnPolicy::minority);
  EXPECT_THROW(turn_policy_from_string("sideways"), Error);
  for (auto tp : {TurnPolicy::black, TurnPolicy::white, TurnPolicy::majority, TurnPolicy::minority})
    EXPECT_EQ(turn_policy_from_string(to_string(tp)), tp);
}

TEST(Decompose, AllWhiteIsEmpty) { EXPECT_TRUE(decompose_paths(Bitmap(5, 4), exact()).empty()); }

TEST(Decompose, SinglePixel) {
  const auto loops = decompose_paths(bitmap_of({"...", ".#.", "..."}), exact());
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(loops[0].sign, '+');
  EXPECT_EQ(loops[0].vertices.size(), 4u);
  EXPECT_EQ(loops[0].area, 1);
  EXPECT_GT(signed_area2(loops[0]), 0);
  expect_unit_steps_and_closed(loops[0]);
}

TEST(Decompose, SquareWithHole) {
  const auto loops = decompose_paths(bitmap_of({"###", "#.#", "###"}), exact());
  ASSERT_EQ(loops.size(), 2u);
  EXPECT_EQ(loops[0].sign, '+');
  EXPECT_EQ(loops[0].area, 9);
  EXPECT_EQ(loops[1].sign, '-');
  EXPECT_EQ(loops[1].area, 1);
  EXPECT_GT(signed_area2(loops[0]), 0);
  EXPECT_LT(signed_area2(loops[1]), 0);
  for (const auto& l : loops) expect_unit_steps_and_closed(l);
}

TEST(Decompose, TurdsizeDropsSmallLoops) {
  const auto bmp = bitmap_of({"#....", ".....", "..###", "..###"});
  TraceParams p = exact();
  EXPECT_EQ(decompose_paths(bmp, p).size(), 2u);
  p.turdsize = 2;
  EXPECT_EQ(decompose_paths(bmp, p).size(), 1u);
  p.turdsize = 7;
  EXPECT_EQ(decompose_paths(bmp, p).size(), 0u);
}

TEST(Decompose, TurnPolicyResolvesSaddles) {
  const auto bmp = bitmap_of({"#.", ".#"});
  TraceParams p = exact();
  p.turnpolicy = TurnPolicy::black;  // joins the diagonal pair
  EXPECT_EQ(decompose_paths(bmp, p).size(), 1u);
  p.turnpolicy = TurnPolicy::white;  // separates it
  EXPECT_EQ(decompose_paths(bmp, p).size(), 2u);
}

TEST(Decompose, MatchesFloodFillOnAll3x3) {
  for (int mask = 0; mask < 512; ++mask) {
    Bitmap b(3, 3);
    for (int i = 0; i < 9; ++i) b.set(i % 3, i / 3, (mask >> i) & 1);
    if (oracle::has_saddle(b)) continue;
    const auto t = oracle::count_topology(b);
    const auto loops = decompose_paths(b, exact());
    ASSERT_EQ(static_cast<int>(loops.size()), t.components + t.holes) << "mask " << mask;
    for (const auto& l : loops) expect_unit_steps_and_closed(l);
  }
}

TEST(Decompose, MatchesFloodFillOnRandom8x8) {
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 200; ++seed) {
    const auto b = oracle::random_bitmap(8, 8, 0.5, seed);
    if (oracle::has_saddle(b)) continue;
    ++tested;
    const auto t = oracle::count_topology(b);
    ASSERT_EQ(static_cast<int>(decompose_paths(b, exact()).size()), t.components + t.holes) << "seed " << seed;
  }
}

TEST(Decompose, AreaMatchesShoelaceForOuterLoops) {
  for (std::uint64_t seed = 0; seed < 30; ++seed)
    for (const auto& l : decompose_paths(oracle::random_bitmap(10, 10, 0.6, seed), exact()))
      EXPECT_EQ(std::labs(signed_area2(l)), 2 * l.area);
}

TEST(LongestStraight, MatchesBruteForce) {
  int loops = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed)
    for (const auto& l : decompose_paths(oracle::random_bitmap(7, 7, 0.55, seed), exact())) {
      if (l.vertices.size() < 4) continue;
      ++loops;
      ASSERT_EQ(longest_straight(l), oracle::longest_straight(l.vertices)) << "seed " << seed;
    }
  EXPECT_GT(loops, 100);
}

TEST(BestPolygon, RectangleAndPixel) {
  EXPECT_EQ(best_polygon(loop_of({"#"})).indices.size(), 4u);
  const auto rect = loop_of({"....", ".###", ".###", "...."});
  const auto poly = best_polygon(rect);
  EXPECT_EQ(poly.indices.size(), 4u);
  // corners of the rectangle
  for (int idx : poly.indices) {
    const auto p = rect.vertices[idx];
    EXPECT_TRUE((p.x == 1 || p.x == 4) && (p.y == 1 || p.y == 3)) << p.x << "," << p.y;
  }
}

TEST(BestPolygon, StaircaseNeedsFewerSegmentsThanVertices) {
  const auto l = loop_of({"#...", "##..", "###.", "####"});
  const auto poly = best_polygon(l);
  EXPECT_LT(poly.indices.size() + 1, l.vertices.size());
  EXPECT_EQ(static_cast<int>(poly.indices.size()), oracle::min_segments(longest_straight(l)));
}

TEST(BestPolygon, MatchesExhaustiveMinimumOnSmallLoops) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed)
    for (const auto& l : decompose_paths(oracle::random_bitmap(5, 5, 0.5, seed), exact())) {
      if (l.vertices.size() > 16) continue;
      ++checked;
      const auto poly = best_polygon(l);
      ASSERT_EQ(static_cast<int>(poly.indices.size()), oracle::min_segments(oracle::longest_straight(l.vertices)))
          << "seed " << seed;
      ASSERT_TRUE(std::is_sorted(poly.indices.begin(), poly.indices.end()));
    }
  EXPECT_GT(checked, 300);
}

TEST(BestPolygon, DegenerateLoopIsRejected) {
  PathLoop l;
  l.vertices = {{0, 0}, {1, 0}};
  EXPECT_THROW(best_polygon(l), Error);
}

TEST(AdjustVertices, RectangleCornersStayOnLattice) {
  const auto l = loop_of({".....", ".###.", ".###.", "....."});
  const auto v = adjust_vertices(l, best_polygon(l));
  ASSERT_EQ(v.size(), 4u);
  for (const auto& p : v) {
    EXPECT_NEAR(p.x, std::round(p.x), 1e-9);
    EXPECT_NEAR(p.y, std::round(p.y), 1e-9);
  }
}

TEST(AdjustVertices, StaysInsideUnitCell) {
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    for (const auto& l : decompose_paths(oracle::random_bitmap(9, 9, 0.5, seed), exact())) {
      const auto poly = best_polygon(l);
      const auto v = adjust_vertices(l, poly);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto c = l.vertices[poly.indices[i]];
        EXPECT_LE(std::abs(v[i].x - c.x), 0.5 + 1e-9);
        EXPECT_LE(std::abs(v[i].y - c.y), 0.5 + 1e-9);
      }
    }
}

TEST(AdjustVertices, CollinearChainStaysOnLine) {
  // a long flat bar: the two vertices on each long side sit on y = 0 or y = 2
  const auto l = loop_of({"##########", "##########"});
  const auto poly = best_polygon(l);
  const auto v = adjust_vertices(l, poly);
  for (const auto& p : v) EXPECT_TRUE(std::abs(p.y) < 1e-9 || std::abs(p.y - 2) < 1e-9) << p.y;
}

std::vector<Point> square_vertices() { return {{0, 0}, {10, 0}, {10, 10}, {0, 10}}; }

TEST(Smooth, AlphamaxZeroGivesCorners) {
  const auto c = smooth(square_vertices(), 0.0);
  for (const auto& s : c.segments) EXPECT_EQ(s.tag, CurveTag::corner);
}

TEST(Smooth, LargeAlphamaxGivesCurves) {
  const auto c = smooth(square_vertices(), 100.0);
  for (const auto& s : c.segments) EXPECT_EQ(s.tag, CurveTag::curveto);
}

TEST(Smooth, SquareIsSymmetric) {
  const auto c = smooth(square_vertices(), 1.0);
  ASSERT_EQ(c.size(), 4u);
  for (const auto& s : c.segments) {
    EXPECT_EQ(s.tag, c.segments[0].tag);
    EXPECT_NEAR(s.alpha, c.segments[0].alpha, 1e-12);
  }
}

TEST(OptimizeCurve, NeverAddsSegments) {
  const auto img = fixture::disk(128, 64, 64, 40);
  TraceParams p;
  p.opticurve = false;
  const auto loops = decompose_paths(threshold(img, p.threshold), p);
  ASSERT_EQ(loops.size(), 1u);
  const auto raw = trace_loop(loops[0], p);
  const auto opt = optimize_curve(raw, 0.2);
  EXPECT_LT(opt.size(), raw.size());
  EXPECT_EQ(optimize_curve(opt, 0.2).size() <= opt.size(), true);
}

TEST(OptimizeCurve, StaysCloseToInput) {
  const auto img = fixture::disk(128, 0, 0, 90);  // quarter disk in the corner
  TraceParams p;
  p.opticurve = false;
  const auto loops = decompose_paths(threshold(img, p.threshold), p);
  ASSERT_EQ(loops.size(), 1u);
  const auto raw = to_subpath(trace_loop(loops[0], p));
  p.opticurve = true;
  const auto opt = to_subpath(trace_loop(loops[0], p));
  EXPECT_LT(opt.segments.size(), raw.segments.size());
  const auto dense_raw = flatten(raw, 0.01), dense_opt = flatten(opt, 0.01);
  // every optimised point lies near the unoptimised outline
  auto closed = dense_raw;
  closed.push_back(closed.front());
  double worst = 0;
  for (const auto& q : dense_opt) {
    double d = 1e9;
    for (std::size_t i = 0; i + 1 < closed.size(); ++i) d = std::min(d, oracle::distance_to_segment(q, closed[i], closed[i + 1]));
    worst = std::max(worst, d);
  }
  EXPECT_LE(worst, p.opttolerance + 0.05);
}

TEST(OptimizeCurve, DisabledMeansUnchanged) {
  const auto img = fixture::disk(64, 32, 32, 20);
  TraceParams p;
  p.opticurve = false;
  const auto loops = decompose_paths(threshold(img, p.threshold), p);
  const auto a = trace_loop(loops[0], p);
  const auto b = smooth(adjust_vertices(loops[0], best_polygon(loops[0])), p.alphamax);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.segments[i].c[2], b.segments[i].c[2]);
}

TEST(Trace, AllWhiteHasNoPaths) { EXPECT_TRUE(trace(fixture::uniform(32, 32, 255)).paths.empty()); }

TEST(Trace, DiskRoundTrip) {
  const auto img = fixture::disk(256, 128, 128, 80);
  const auto doc = trace(img);
  EXPECT_EQ(doc.paths.size(), 1u);
  EXPECT_EQ(doc.width, 256);
  EXPECT_GE(ssim(img, render(doc, 256, 256)), 0.95);
}

TEST(Trace, HolesShareThePathOfTheirOutline) {
  GrayImage ring = fixture::disk(128, 64, 64, 50);
  const auto inner = fixture::disk(128, 64, 64, 25);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      if (inner.at(x, y) == 0) ring.at(x, y) = 255;
  const auto doc = trace(ring);
  ASSERT_EQ(doc.paths.size(), 1u);
  EXPECT_EQ(doc.paths[0].loops.size(), 2u);
  const auto back = render(doc, 128, 128);
  EXPECT_EQ(back.at(64, 64), 255);  // hole stays white
  EXPECT_EQ(back.at(64, 64 - 38), 0);
}

TEST(Trace, InvertedImageSwapsBackground) {
  const auto img = fixture::disk(128, 64, 64, 30);
  const auto a = trace(img).paths.size(), b = trace(invert(img)).paths.size();
  EXPECT_LE(std::abs(static_cast<long>(a) - static_cast<long>(b)), 1);
}

TEST(Trace, TurdsizeIsMonotone) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto img = fixture::noise(48, 48, seed);
    std::size_t prev = SIZE_MAX;
    for (int t : {0, 1, 2, 4, 8, 16, 64}) {
      TraceParams p;
      p.turdsize = t;
      const auto n = trace(img, p).paths.size();
      EXPECT_LE(n, prev) << "turdsize " << t;
      prev = n;
    }
  }
}

TEST(Trace, ConvexShapesRoundTrip) {
  const std::vector<GrayImage> shapes{fixture::rect(256, 256, 60, 70, 200, 150), fixture::disk(256, 100, 140, 40),
                                      fixture::rect(256, 256, 10, 10, 31, 31)};
  for (const auto& img : shapes) EXPECT_GE(ssim(img, render(trace(img), 256, 256)), 0.9);
}

TEST(Trace, RectangleAreaIsPreserved) {
  const auto img = fixture::rect(256, 256, 40, 50, 190, 170);
  const auto back = render(trace(img), 256, 256);
  long black = 0;
  for (auto p : back.pixels()) black += p == 0;
  EXPECT_NEAR(black, 150 * 120, 0.02 * 150 * 120);
}

TEST(Trace, RenderTraceStabilises) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    GrayImage img(64, 64, 255);
    const auto bmp = oracle::random_bitmap(16, 16, 0.4, seed);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (bmp.get(x / 4, y / 4)) img.at(x, y) = 0;
    const auto once = render(trace(img), 64, 64);
    const auto n1 = trace(once).paths.size();
    const auto n2 = trace(render(trace(once), 64, 64)).paths.size();
    EXPECT_LE(std::abs(static_cast<long>(n1) - static_cast<long>(n2)), 1);
  }
}

TEST(Trace, Deterministic) {
  const auto img = fixture::noise(64, 64, 3);
  EXPECT_EQ(trace(img), trace(img));
}

}  // namespace
}  // namespace tracekit
