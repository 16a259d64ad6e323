#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/types.hpp"

namespace sqzm {

// Corrective sharing: a coarse grid of correctives is expanded to the full UV
// grid by nearest (top-left) upsampling, so every f x f block of gaussians
// shares one corrective. The lookup table is the masked gather of the
// upsampled contiguous index grid.

/// Nearest upsampling by an integer factor: out[r][c] = in[r/f][c/f].
/// `grid` is row-major h x w with `channels` values per cell.
std::vector<double> upsample_nearest(const std::vector<double>& grid, int h, int w,
                                     int channels, int factor);

/// Row-major gather of masked-true cells; output row order matches
/// SplatSet::uv_index order. Returns popcount(mask) rows of `channels` values.
std::vector<double> apply_mask(const std::vector<double>& grid, int h, int w, int channels,
                               const std::vector<uint8_t>& mask);

/// lut[x] = shared-corrective index of gaussian x, built as
/// apply_mask(upsample_nearest(A, factor), mask) where A counts coarse cells
/// in contiguous row-major order.
std::vector<uint32_t> build_lut(const std::vector<uint8_t>& mask, int h, int w, int factor);

}  // namespace sqzm
