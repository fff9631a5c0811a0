#pragma once

#include <vector>

#include "tracekit/raster.hpp"
#include "tracekit/vector.hpp"

namespace tracekit {

constexpr double kDefaultFlattenTolerance = 0.25;

/// Polyline approximation of a closed subpath. The closing edge back to the
/// first point is implicit, so a trailing copy of the start is dropped.
std::vector<Point> flatten(const SubPath& loop, double tolerance = kDefaultFlattenTolerance);

/// Appends the subdivision points of one cubic (excluding p0, including p3).
void flatten_cubic(Point p0, Point p1, Point p2, Point p3, double tolerance, std::vector<Point>& out);

/// Nonzero-winding fill sampled at pixel centres, each path element filled
/// separately and the results unioned. Doc coordinates are scaled to the
/// target size when the doc has positive dimensions.
GrayImage render(const VectorDoc& doc, int width, int height, double tolerance = kDefaultFlattenTolerance);

}  // namespace tracekit
