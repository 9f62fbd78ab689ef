#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::ingest::pdf {

/// Malformed or unsupported PDF content.
class PdfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One page of a scanned PDF: the page's dominant raster image plus the page
/// size in PostScript points (1/72 inch).
struct RasterPage {
  GrayGrid pixels;
  double width_pt = 0.0;
  double height_pt = 0.0;
};

/// Extracts the largest image XObject of every page, in page-tree order.
/// Handles classic cross-reference files with Flate/DCT images at 1 or 8 bits
/// per component in gray, RGB or CMYK. Compressed object streams are not
/// supported. Throws PdfError on anything it cannot decode.
std::vector<RasterPage> read_raster_pdf(std::span<const std::uint8_t> bytes);

/// Writes one full-page 8-bit grayscale image per page; page size is derived
/// from the pixel size at `dpi`.
std::vector<std::uint8_t> write_raster_pdf(std::span<const GrayGrid> pages, int dpi);

}  // namespace signet::ingest::pdf
