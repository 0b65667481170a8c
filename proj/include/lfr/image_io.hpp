#pragma once

#include "lfr/core.hpp"

#include <filesystem>

namespace lfr {

// 8-bit level of a [0, 1] sample (clamped, rounded to nearest).
inline std::uint8_t to_byte(float value) {
    const float clamped = value < 0.f ? 0.f : (value > 1.f ? 1.f : value);
    return static_cast<std::uint8_t>(clamped * 255.f + 0.5f);
}

inline float from_byte(std::uint8_t value) { return float(value) / 255.f; }

// Decodes any PNG colour type to RGB in [0, 1]; rows = image height.
Image read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& image);
void write_png_gray(const std::filesystem::path& path, const MatrixX<float>& gray);

} // namespace lfr
