#include "m3dseg/common/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace m3dseg::io {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::span<const std::uint8_t> Reader::bytes(std::size_t n) {
  if (n > remaining()) throw FormatError(what_ + ": truncated");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string Reader::text(std::size_t n) {
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

std::uint64_t Reader::get(int n) {
  auto b = bytes(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

void Reader::expect_magic(std::string_view magic) {
  if (remaining() < magic.size() || text(magic.size()) != magic)
    throw FormatError(what_ + ": bad magic, expected '" + std::string(magic) + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace m3dseg::io
