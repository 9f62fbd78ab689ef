#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::io {

/// 8-bit quantization used for every on-disk intensity image.
std::uint8_t to_byte(float v) noexcept;

/// Decodes PNG/JPEG/TIFF bytes (first page) into a [0,1] grid. Colour input is
/// converted to luma. Returns an empty grid when the bytes are not an image.
GrayGrid decode_gray(std::span<const std::uint8_t> bytes);

/// Reads every page of a raster file (multi-page TIFF yields several).
std::vector<GrayGrid> read_gray_pages(const std::filesystem::path& path);

GrayGrid read_gray(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const GrayGrid& grid);
void write_png(const std::filesystem::path& path, const GrayGrid& grid);

/// Writes several pages into one TIFF file.
void write_tiff(const std::filesystem::path& path, std::span<const GrayGrid> pages);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace signet::io
