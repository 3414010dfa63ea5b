#include "swcap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace swcap {

namespace {

constexpr char kMagic[8] = {'S', 'W', 'C', 'C', 'K', 'P', 'T', '\0'};

}  // namespace

void le::put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void le::put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void le::put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n, const char* what) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError(std::string("truncated input while reading ") + what, pos_);
  }
}

std::uint32_t ByteReader::u32(const char* what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64(const char* what) {
  need(8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

std::string ByteReader::raw(std::size_t n, const char* what) {
  need(n, what);
  std::string s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) throw FormatError("'" + path.string() + "' is a directory");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

CheckpointArchive make_archive(const std::string& header, const ParameterList& params) {
  check_unique_names(params);
  CheckpointArchive archive;
  archive.header = header;
  archive.entries.reserve(params.size());
  for (const auto& p : params) {
    ArchiveEntry e;
    e.name = p.name;
    e.shape = p.tensor.shape();
    e.values.assign(p.tensor.data().begin(), p.tensor.data().end());
    archive.entries.push_back(std::move(e));
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const CheckpointArchive& archive) {
  std::string out(kMagic, sizeof kMagic);
  le::put_u32(out, archive.format_version);
  le::put_u64(out, archive.header.size());
  out += archive.header;
  le::put_u64(out, archive.entries.size());
  for (const auto& e : archive.entries) {
    le::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    le::put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto extent : e.shape) le::put_u64(out, extent);
    for (double v : e.values) le::put_f64(out, v);
  }
  write_file_bytes(path, out);
}

CheckpointArchive read_archive(const std::filesystem::path& path) {
  ByteReader in(read_file_bytes(path));
  if (in.raw(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw FormatError("'" + path.string() + "' is not a checkpoint archive", 0);
  }
  CheckpointArchive archive;
  archive.format_version = in.u32("format version");
  if (archive.format_version != kCheckpointFormatVersion) {
    throw FormatError("unsupported checkpoint format version " +
                          std::to_string(archive.format_version),
                      in.offset() - 4);
  }
  const auto header_len = in.u64("header length");
  archive.header = in.raw(header_len, "header");
  const auto count = in.u64("parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    e.name = in.raw(in.u32("name length"), "parameter name");
    const auto rank = in.u32("rank");
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto extent = in.u64("extent");
      e.shape.push_back(extent);
      n *= extent;
    }
    if (n * 8 > in.remaining()) {
      throw FormatError("truncated payload for parameter '" + e.name + "'", in.offset());
    }
    e.values.resize(n);
    for (auto& v : e.values) v = in.f64("parameter value");
    archive.entries.push_back(std::move(e));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last parameter", in.offset());
  return archive;
}

void restore_parameters(const CheckpointArchive& archive, ParameterList& params) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : archive.entries) by_name[e.name] = &e;
  if (by_name.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second->shape != p.tensor.shape()) {
      throw FormatError("parameter '" + p.name + "' has shape " + shape_str(it->second->shape) +
                        " in checkpoint, model expects " + shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(it->second->values[i]);
  }
}

}  // namespace swcap
