#pragma once

#include <filesystem>

#include "mvf/image.hpp"

namespace mvf {

// 16-bit grayscale (depth maps, instance ids).
Image<uint16_t> read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const Image<uint16_t>& img);

// 8-bit grayscale.
Image<uint8_t> read_png8(const std::filesystem::path& path);
void write_png8(const std::filesystem::path& path, const Image<uint8_t>& img);

void write_png_rgb(const std::filesystem::path& path, const Image<Rgb8>& img);
Image<Rgb8> read_png_rgb(const std::filesystem::path& path);

}  // namespace mvf
