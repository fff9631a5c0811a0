#pragma once

#include <string>
#include <vector>

#include "tracekit/raster.hpp"
#include "tracekit/vector.hpp"

namespace tracekit {

enum class TurnPolicy { black, white, majority, minority };

std::string to_string(TurnPolicy p);
TurnPolicy turn_policy_from_string(const std::string& s);

struct TraceParams {
  int threshold = 128;  // pixels darker than this are foreground
  int turdsize = 2;     // loops enclosing fewer pixels are dropped
  TurnPolicy turnpolicy = TurnPolicy::minority;
  double alphamax = 1.0;
  bool opticurve = true;
  double opttolerance = 0.2;

  void validate() const;
};

struct IPoint {
  int x = 0, y = 0;
  bool operator==(const IPoint&) const = default;
};

/// Closed boundary between black and white pixels. Vertices are pixel
/// corners (y down); the edge from the last vertex back to the first closes
/// the loop. '+' loops run counterclockwise as seen on screen and '-' loops
/// (holes) clockwise.
struct PathLoop {
  std::vector<IPoint> vertices;
  char sign = '+';
  long area = 0;  // enclosed pixels, holes included
};

/// Twice the signed area; positive for counterclockwise loops on screen.
long signed_area2(const PathLoop& loop);

/// Boundary decomposition with recursive inversion. Loops come out in
/// discovery order (top-to-bottom, left-to-right by starting pixel).
std::vector<PathLoop> decompose_paths(const Bitmap& bmp, const TraceParams& params);

/// Indices into the parent loop's vertices where polygon corners sit, ascending.
struct Polygon {
  std::vector<int> indices;
};

/// For each vertex i, the furthest index reachable by a straight subpath
/// (cyclic, as an index into the loop).
std::vector<int> longest_straight(const PathLoop& loop);

/// Penalty of the segment from vertex i to vertex j (j may exceed n for wraparound).
double segment_penalty(const PathLoop& loop, int i, int j);

/// Minimum-segment polygon, ties broken by total penalty.
Polygon best_polygon(const PathLoop& loop);

/// Each polygon corner moved to the point of its unit cell closest (least
/// squares) to the two adjacent fitted lines.
std::vector<Point> adjust_vertices(const PathLoop& loop, const Polygon& polygon);

enum class CurveTag { corner, curveto };

/// Segment j runs from the end of segment j-1 to c[2]. Corner segments go
/// straight to `vertex` and then to c[2]; curveto segments are cubic
/// Beziers with control points c[0], c[1].
struct CurveSegment {
  CurveTag tag = CurveTag::corner;
  Point c[3];
  Point vertex;
  double alpha = 0, alpha0 = 0, beta = 0.5;
};

struct Curve {
  std::vector<CurveSegment> segments;
  std::size_t size() const { return segments.size(); }
  Point start() const { return segments.back().c[2]; }
};

Curve smooth(const std::vector<Point>& vertices, double alphamax);

/// Joins runs of Bezier segments that a single curve can replace within `opttolerance`.
Curve optimize_curve(const Curve& curve, double opttolerance);

SubPath to_subpath(const Curve& curve);

/// Full pipeline for one loop.
Curve trace_loop(const PathLoop& loop, const TraceParams& params);

VectorDoc trace_bitmap(const Bitmap& bmp, const TraceParams& params);
VectorDoc trace(const GrayImage& img, const TraceParams& params = {});

}  // namespace tracekit
