#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace daisi {

/// Little-endian binary writer with an 8-byte magic header and a version
/// byte; shared by the model and ensemble file formats.
class BinaryWriter {
 public:
  BinaryWriter(const std::filesystem::path& path, const char magic[9],
               std::uint8_t version = 1);

  void write_u32(std::uint32_t v);
  void write_u64(std::uint64_t v);
  void write_f64(double v);

 private:
  std::ofstream out_;
  void write_bytes(const unsigned char* data, std::size_t n);
};

class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, const char magic[9],
               std::uint8_t expected_version = 1);

  std::uint32_t read_u32();
  std::uint64_t read_u64();
  double read_f64();

 private:
  std::ifstream in_;
  void read_bytes(unsigned char* data, std::size_t n);
};

/// Formats a double so it parses back to the same value ("%.17g"); NaNs print
/// as "nan".  Used by every CSV writer so outputs are byte-stable.
std::string format_double(double v);

/// Minimal CSV writer: a header row, then rows of formatted doubles.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header);
  void write_row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace daisi
