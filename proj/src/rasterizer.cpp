#include "tracekit/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "tracekit/error.hpp"

namespace tracekit {

namespace {

double distance_to_line(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  if (len < 1e-12) return std::hypot(p.x - a.x, p.y - a.y);
  return std::abs((p.x - a.x) * dy - (p.y - a.y) * dx) / len;
}

void subdivide(Point p0, Point p1, Point p2, Point p3, double tol, int depth, std::vector<Point>& out) {
  // The curve lies in the hull of its control points, so control points
  // near the chord bound the deviation.
  const double flat = std::max(distance_to_line(p1, p0, p3), distance_to_line(p2, p0, p3));
  if (flat <= tol || depth >= 24) {
    out.push_back(p3);
    return;
  }
  const Point p01 = lerp(0.5, p0, p1), p12 = lerp(0.5, p1, p2), p23 = lerp(0.5, p2, p3);
  const Point a = lerp(0.5, p01, p12), b = lerp(0.5, p12, p23);
  const Point mid = lerp(0.5, a, b);
  subdivide(p0, p01, a, mid, tol, depth + 1, out);
  subdivide(mid, b, p23, p3, tol, depth + 1, out);
}

struct Edge {
  double x0, y0, x1, y1;
  int dir;
};

}  // namespace

void flatten_cubic(Point p0, Point p1, Point p2, Point p3, double tolerance, std::vector<Point>& out) {
  if (!(tolerance > 0)) throw Error("flatten tolerance must be positive");
  subdivide(p0, p1, p2, p3, tolerance, 0, out);
}

std::vector<Point> flatten(const SubPath& loop, double tolerance) {
  if (!(tolerance > 0)) throw Error("flatten tolerance must be positive");
  std::vector<Point> out{loop.start};
  for (const auto& s : loop.segments) {
    if (s.kind == SegmentKind::line)
      out.push_back(s.end);
    else
      subdivide(out.back(), s.c1, s.c2, s.end, tolerance, 0, out);
  }
  if (out.size() > 1 && out.back() == out.front()) out.pop_back();
  return out;
}

GrayImage render(const VectorDoc& doc, int width, int height, double tolerance) {
  if (width <= 0 || height <= 0) throw Error("render size must be positive");
  GrayImage img(width, height, 255);
  const double sx = doc.width > 0 ? width / doc.width : 1.0;
  const double sy = doc.height > 0 ? height / doc.height : 1.0;

  std::vector<Edge> edges;
  std::vector<std::pair<double, int>> crossings;
  auto pix = img.pixels();

  for (const auto& path : doc.paths) {
    edges.clear();
    double ymin = INFINITY, ymax = -INFINITY;
    for (const auto& loop : path.loops) {
      auto poly = flatten(loop, tolerance / std::max(sx, sy));
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point a = poly[i], b = poly[(i + 1) % poly.size()];
        if (a.y == b.y) continue;
        Edge e{a.x * sx, a.y * sy, b.x * sx, b.y * sy, a.y < b.y ? 1 : -1};
        if (e.y0 > e.y1) {
          std::swap(e.x0, e.x1);
          std::swap(e.y0, e.y1);
        }
        ymin = std::min(ymin, e.y0);
        ymax = std::max(ymax, e.y1);
        edges.push_back(e);
      }
    }
    if (edges.empty()) continue;
    const int r0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
    for (int y = r0; y <= r1; ++y) {
      const double cy = y + 0.5;
      crossings.clear();
      for (const auto& e : edges) {
        if (cy < e.y0 || cy >= e.y1) continue;
        const double t = (cy - e.y0) / (e.y1 - e.y0);
        crossings.emplace_back(e.x0 + t * (e.x1 - e.x0), e.dir);
      }
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      int winding = 0;
      for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
        winding += crossings[i].second;
        if (winding == 0) continue;
        // pixels whose centre satisfies xa <= x + 0.5 < xb
        const int xa = std::max(0, static_cast<int>(std::ceil(crossings[i].first - 0.5)));
        const int xb = std::min(width, static_cast<int>(std::ceil(crossings[i + 1].first - 0.5)));
        for (int x = xa; x < xb; ++x) pix[static_cast<std::size_t>(y) * width + x] = 0;
      }
    }
  }
  return img;
}

}  // namespace tracekit
