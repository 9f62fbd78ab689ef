#pragma once

#include "signet/core/types.hpp"

namespace signet {

/// Box-filter resampling: every output pixel is the coverage-weighted mean of
/// the source pixels under its footprint. Output values stay inside the input
/// range.
GrayGrid resample_area(const GrayGrid& src, int width, int height);

/// Copies the inclusive box out of `src`. The box must lie inside the grid.
GrayGrid crop_grid(const GrayGrid& src, const BBox& box);

/// Scales `crop` so its longer side is 256, centers it on a white 256x256
/// canvas and returns it as a RAW signature image.
///
/// A 256x256 input is returned unchanged, so the operation is idempotent on
/// its own outputs.
SignatureImage normalize_to_canvas(const GrayGrid& crop, Provenance provenance = {});

}  // namespace signet
