#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tracekit/raster.hpp"

namespace tracekit {

enum class SynthKind {
  blobs,  // a few dark smooth blobs on a light ground
  scene,  // gradient ground, soft-edged shapes, texture and sensor noise
};

/// Deterministic procedural grayscale image for a given seed.
GrayImage synth_image(std::uint64_t seed, SynthKind kind, int side = 256);

/// Images seed, seed+1, ... of one kind.
std::vector<GrayImage> synth_corpus(int count, std::uint64_t seed, SynthKind kind, int side = 256);

/// Writes img_0000.pgm, img_0001.pgm, ... and returns the paths.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, const std::vector<GrayImage>& images);

}  // namespace tracekit
