#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/image.hpp"

namespace forge {

// 8-bit RGB PNG, fixed compression settings and no ancillary chunks, so the
// encoded bytes are a pure function of the pixels.
std::vector<std::uint8_t> png_encode(const Image& image);
Image png_decode(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
// Writes bytes verbatim (no newline translation).
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace forge
