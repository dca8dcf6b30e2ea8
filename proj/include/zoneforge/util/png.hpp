#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace zoneforge {

/// Minimal deterministic PNG encoder: 8-bit RGB, zlib stream with stored
/// (uncompressed) deflate blocks. Byte-identical output for identical input.
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb);

} // namespace zoneforge
