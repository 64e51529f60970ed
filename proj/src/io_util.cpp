#include "sitrec/io_util.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sitrec/common.hpp"

namespace sitrec::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw DataError("read failed: " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view tok, std::string_view context) {
  std::string buf(tok);
  if (buf.empty()) throw DataError("empty number in " + std::string(context));
  errno = 0;
  char* end = nullptr;
  double x = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || errno == ERANGE)
    throw DataError("bad number '" + buf + "' in " + std::string(context));
  return x;
}

std::int64_t parse_int(std::string_view tok, std::string_view context) {
  std::string buf(tok);
  if (buf.empty()) throw DataError("empty integer in " + std::string(context));
  errno = 0;
  char* end = nullptr;
  long long x = std::strtoll(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size() || errno == ERANGE)
    throw DataError("bad integer '" + buf + "' in " + std::string(context));
  return x;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_hex(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string content_hash(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  return content_hash(read_file(path));
}

std::vector<std::string_view> lines_of(std::string_view content) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t pos = content.find('\n', start);
    std::string_view line = pos == std::string_view::npos
                                ? content.substr(start)
                                : content.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> read_record_lines(std::string_view content,
                                                std::string_view magic,
                                                std::string_view path_for_errors) {
  auto ls = lines_of(content);
  if (ls.empty())
    throw DataError("missing header in " + std::string(path_for_errors) + " (expected '" +
                    std::string(magic) + " v1')");
  auto header = split_ws(ls.front());
  if (header.size() != 2 || header[0] != magic || header[1] != "v1")
    throw DataError("bad header '" + std::string(ls.front()) + "' in " +
                    std::string(path_for_errors) + " (expected '" + std::string(magic) + " v1')");
  std::vector<std::string_view> out;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty() || ls[i].front() == '#') continue;
    out.push_back(ls[i]);
  }
  return out;
}

std::vector<double> parse_vector(std::string_view csv, std::string_view context) {
  std::vector<double> out;
  for (auto tok : split(csv, ',')) out.push_back(parse_double(tok, context));
  return out;
}

std::string fmt_vector(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += fmt_double(v[i]);
  }
  return out;
}

}  // namespace sitrec::io
