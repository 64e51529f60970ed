#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sitrec::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Splits on a single delimiter; keeps empty fields.
std::vector<std::string_view> split(std::string_view line, char delim);
// Splits on runs of spaces; drops empty tokens.
std::vector<std::string_view> split_ws(std::string_view s);

std::string_view trim(std::string_view s);

// Strict numeric parsing: the whole token must parse.
double parse_double(std::string_view tok, std::string_view context);
std::int64_t parse_int(std::string_view tok, std::string_view context);

// Shortest round-trip decimal form ("%.17g" fallback). Used in data files.
std::string fmt_double(double x);
// Hex float form ("%a"): bit-exact round trip. Used in checkpoints.
std::string fmt_hex(double x);

// 64-bit FNV-1a content hash, hex-encoded. Used for run manifests.
std::uint64_t fnv1a(std::string_view bytes);
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

// Line iteration over a loaded file. Tolerates a trailing newline; strips \r.
std::vector<std::string_view> lines_of(std::string_view content);

// Reads a versioned line-delimited file: checks "<magic> <version>" header,
// returns the remaining non-empty, non-comment lines.
std::vector<std::string_view> read_record_lines(std::string_view content,
                                                std::string_view magic,
                                                std::string_view path_for_errors);

std::vector<double> parse_vector(std::string_view csv, std::string_view context);
std::string fmt_vector(const std::vector<double>& v);

}  // namespace sitrec::io
