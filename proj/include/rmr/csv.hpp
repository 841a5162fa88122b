#pragma once

#include <rmr/linalg.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace rmr {

/// One matrix row per line, comma separated, no header. Values are written
/// with 17 significant digits so that reading back is exact.
std::string format_csv(const Matrix &m);
Matrix parse_csv(std::string_view text);

void write_csv(const std::filesystem::path &path, const Matrix &m);
Matrix read_csv(const std::filesystem::path &path);

std::string format_real(double v);
/// Strict decimal parse; throws ParseError at (row, col) on failure.
double parse_real(std::string_view cell, std::size_t row, std::size_t col);

std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, std::string_view text);

} // namespace rmr
