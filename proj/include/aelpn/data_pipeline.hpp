#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "aelpn/rng.hpp"
#include "aelpn/signal.hpp"
#include "aelpn/tensor.hpp"

namespace aelpn {

// Grayscale raster with values in [0, 1], row-major.
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  Vec pix;

  double at(std::size_t r, std::size_t c) const { return pix[r * width + c]; }
  double& at(std::size_t r, std::size_t c) { return pix[r * width + c]; }
};

// PGM/PPM reader (P2/P3/P5/P6, maxval 255). Color collapses to gray with
// luma weights (0.299, 0.587, 0.114). Malformed input throws IoError naming
// the byte offset of the problem.
ImageGrid load_pnm(const std::string& path);

// Binary 8-bit PGM (P5) writer; values clamped to [0, 1] then scaled to 255
// with round-to-nearest.
void write_pgm(const std::string& path, const ImageGrid& img);

struct PatchSpec {
  std::size_t height = 16;
  std::size_t width = 16;
};

// Uniformly random top-left corner; returns the patch flattened row-major.
Vec sample_patch(const ImageGrid& img, const PatchSpec& spec, Rng& rng);

// Piecewise-smooth synthetic scene: 0.5 background plus random linear
// gradients, axis-aligned rectangles and soft disks, clipped to [0, 1].
struct SyntheticImageSpec {
  std::size_t size = 64;
  std::size_t gradients = 2;
  std::size_t rectangles = 3;
  std::size_t disks = 2;
  double amplitude = 0.45;  // max |contribution| of one component
};

ImageGrid synth_image(const SyntheticImageSpec& spec, Rng& rng);

// Raw tensor framing: magic "AELP", u32 version=1, u32 rank, u64 dims[],
// little-endian IEEE doubles. Bit-exact round trip.
void write_raw_tensor(std::ostream& out, const Tensor& t);
Tensor read_raw_tensor(std::istream& in);

}  // namespace aelpn
