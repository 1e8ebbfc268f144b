#include "daisi/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace daisi {

namespace {

template <class T>
void to_le(T value, unsigned char* out) {
  // serialize explicitly as little-endian regardless of host order
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
}

template <class T>
T from_le(const unsigned char* in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(in[i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path,
                           const char magic[9], std::uint8_t version)
    : out_(path, std::ios::binary) {
  if (!out_)
    throw std::runtime_error("cannot open for writing: " + path.string());
  out_.write(magic, 8);
  const char v = static_cast<char>(version);
  out_.write(&v, 1);
}

void BinaryWriter::write_bytes(const unsigned char* data, std::size_t n) {
  out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw std::runtime_error("binary write failed");
}

void BinaryWriter::write_u32(std::uint32_t v) {
  unsigned char buf[4];
  to_le(v, buf);
  write_bytes(buf, 4);
}

void BinaryWriter::write_u64(std::uint64_t v) {
  unsigned char buf[8];
  to_le(v, buf);
  write_bytes(buf, 8);
}

void BinaryWriter::write_f64(double v) {
  unsigned char buf[8];
  to_le(v, buf);
  write_bytes(buf, 8);
}

BinaryReader::BinaryReader(const std::filesystem::path& path,
                           const char magic[9], std::uint8_t expected_version)
    : in_(path, std::ios::binary) {
  if (!in_)
    throw std::runtime_error("cannot open for reading: " + path.string());
  char got[9] = {};
  in_.read(got, 8);
  if (!in_ || std::strncmp(got, magic, 8) != 0)
    throw std::runtime_error("bad magic in " + path.string());
  char v = 0;
  in_.read(&v, 1);
  if (!in_ || static_cast<std::uint8_t>(v) != expected_version)
    throw std::runtime_error("unsupported version in " + path.string());
}

void BinaryReader::read_bytes(unsigned char* data, std::size_t n) {
  in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw std::runtime_error("binary read failed (truncated file?)");
}

std::uint32_t BinaryReader::read_u32() {
  unsigned char buf[4];
  read_bytes(buf, 4);
  return from_le<std::uint32_t>(buf);
}

std::uint64_t BinaryReader::read_u64() {
  unsigned char buf[8];
  read_bytes(buf, 8);
  return from_le<std::uint64_t>(buf);
}

double BinaryReader::read_f64() {
  unsigned char buf[8];
  read_bytes(buf, 8);
  return from_le<double>(buf);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_)
    throw std::runtime_error("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::write_row(const std::vector<double>& values) {
  if (values.size() != columns_)
    throw std::invalid_argument("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
}

}  // namespace daisi
