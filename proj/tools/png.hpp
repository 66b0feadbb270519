#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace reside::cli {

/// Writes an 8-bit grayscale PNG (zlib-compressed, no interlacing).
void write_png_gray8(const std::filesystem::path& path, std::size_t width,
                     std::size_t height, const std::vector<std::uint8_t>& pixels);

}  // namespace reside::cli
