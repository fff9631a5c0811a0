#pragma once

#include <vector>

namespace tracekit {

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

inline Point lerp(double t, Point a, Point b) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

enum class SegmentKind { line, cubic };

/// One drawing command following the current point. Lines use `end` only.
struct Segment {
  SegmentKind kind = SegmentKind::line;
  Point c1, c2, end;
  bool operator==(const Segment&) const = default;
};

/// Closed subpath: starts and ends at `start`.
struct SubPath {
  Point start;
  std::vector<Segment> segments;
  bool operator==(const SubPath&) const = default;
};

/// One SVG path element: an outline plus any holes, filled with the nonzero rule.
struct VectorPath {
  std::vector<SubPath> loops;
  bool operator==(const VectorPath&) const = default;
};

/// Coordinates are in pixels, y pointing down.
struct VectorDoc {
  double width = 0, height = 0;
  std::vector<VectorPath> paths;
  bool operator==(const VectorDoc&) const = default;

  std::size_t loop_count() const {
    std::size_t n = 0;
    for (const auto& p : paths) n += p.loops.size();
    return n;
  }
};

}  // namespace tracekit
