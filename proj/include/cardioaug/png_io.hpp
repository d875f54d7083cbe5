// png_io.hpp - grayscale PNG slices and label masks.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cardioaug/grid.hpp"

namespace cardioaug {

struct GrayPng {
    int width = 0;
    int height = 0;
    int bit_depth = 8; // 8 or 16 after expansion
    std::vector<std::uint16_t> samples;

    double max_code() const noexcept { return bit_depth == 16 ? 65535.0 : 255.0; }
};

/// Decodes an 1/2/4/8/16-bit grayscale PNG. Colour images are rejected.
GrayPng read_gray_png(const std::filesystem::path &path);

/// Reads the signature and header only.
bool png_header_readable(const std::filesystem::path &path);

/// Raw sample values as intensities.
Image2D read_image_raw(const std::filesystem::path &path, Spacing2D spacing = {});
/// Samples divided by the maximum code of their bit depth, giving [0, 1].
Image2D read_image_unit(const std::filesystem::path &path, Spacing2D spacing = {});
/// 8-bit PNG holding literal labels 0..3.
LabelMask2D read_mask(const std::filesystem::path &path);

/// Writes round(clamp(v, 0, 1) * 65535) as a 16-bit PNG. The file is written
/// to a temporary name and renamed into place.
void write_image_unit16(const std::filesystem::path &path, const Image2D &image);
void write_mask(const std::filesystem::path &path, const LabelMask2D &mask);
void write_gray_png(const std::filesystem::path &path, const GrayPng &png);

/// Atomically replaces `path` with `bytes`.
void write_file_atomic(const std::filesystem::path &path, std::string_view bytes);

} // namespace cardioaug
