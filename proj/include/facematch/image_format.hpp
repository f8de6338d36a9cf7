#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace facematch {

enum class ImageFormat { kPng, kJpeg };

std::string_view mime_type(ImageFormat format);

// Sniffs magic bytes; nullopt for anything but PNG and JPEG.
std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

}  // namespace facematch
