#pragma once

#include "qao/acquisition.hpp"
#include "qao/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace qao {

// Row-major numeric CSV, one image row per line, 17 significant digits.
void write_csv(const std::filesystem::path& path, const Image& values);
Image read_csv(const std::filesystem::path& path);

// Tidy table with a header line.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

// 8-bit PGM of a phase: wrapped to [0, 2 pi) and mapped linearly to 0..255.
void write_phase_pgm(const std::filesystem::path& path, const Image& phase);
// 16-bit PGM of a non-negative image scaled by its maximum (all-zero images stay zero).
void write_pgm16(const std::filesystem::path& path, const Image& values);

// QAOF frame stack: 16-byte little-endian header ("QAOF", u16 version = 1, u16 width, u16 height,
// u16 reserved, u32 frame count) followed by ceil(width * height / 8) bytes per frame.
void write_qaof(const std::filesystem::path& path, const FrameStack& stack);
FrameStack read_qaof(const std::filesystem::path& path);

}  // namespace qao
