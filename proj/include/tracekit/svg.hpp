#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "tracekit/vector.hpp"

namespace tracekit {

/// SVG text: width/height in pt, a flipping group transform, one path
/// element per VectorPath with absolute M/L/C/z commands and numbers
/// printed with 6 significant digits.
std::string emit_svg(const VectorDoc& doc);

/// Reads the path geometry back (M/L/H/V/C/Z, absolute or relative),
/// applying group and path transforms. Other path commands are rejected.
VectorDoc parse_paths(std::string_view svg);

/// Geometry of a single d attribute (no transform applied).
std::vector<SubPath> parse_path_data(std::string_view d);

struct ComplexityStats {
  std::size_t path_count = 0;
  std::size_t total_d_chars = 0;
  std::size_t longest_path_chars = 0;
  bool operator==(const ComplexityStats&) const = default;
};

ComplexityStats complexity_stats(std::string_view svg);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace tracekit
