#pragma once

#include "splatgrasp/renderer.hpp"

#include <filesystem>

namespace splatgrasp {

/// 8-bit PNG; RGBA when the image carries alpha.
void write_png(const std::filesystem::path &path, const Image &image);
/// Reads 8/16-bit gray, RGB or RGBA PNGs into [0, 1] values. Throws ParseError.
Image read_png(const std::filesystem::path &path);

} // namespace splatgrasp
