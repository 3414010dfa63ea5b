#pragma once

// Parameter archive:
//
//   magic      8 bytes  "SWCCKPT\0"
//   version    u32      kCheckpointFormatVersion
//   header_len u64      length of the UTF-8 JSON header that follows
//   header     bytes    {"config": {...}, ...}
//   count      u64      number of parameter records
//   record*    u32 name_len, name bytes, u32 rank, u64 extent[rank],
//              float64 values[product(extent)]
//
// All integers and floats are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swcap/tensor.hpp"

namespace swcap {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct CheckpointArchive {
  std::uint32_t format_version = kCheckpointFormatVersion;
  std::string header;
  std::vector<ArchiveEntry> entries;
};

CheckpointArchive make_archive(const std::string& header, const ParameterList& params);
void write_archive(const std::filesystem::path& path, const CheckpointArchive& archive);
CheckpointArchive read_archive(const std::filesystem::path& path);

// Copies archive values into matching parameters. Every parameter must be
// present with an identical shape; extra entries are an error.
void restore_parameters(const CheckpointArchive& archive, ParameterList& params);

namespace le {
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
}  // namespace le

// Bounds-checked little-endian reader; errors carry the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  double f64(const char* what);
  std::string raw(std::size_t n, const char* what);
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const;
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace swcap
