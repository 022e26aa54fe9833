// SPDX-License-Identifier: Apache-2.0
#include "rei/checkpoint_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "rei/errors.hpp"

namespace rei {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t get(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, const nlohmann::json& header,
                           std::span<const double> payload) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string text = header.dump();
  put_u64(out, text.size());
  out += text;
  put_u64(out, payload.size());
  out.reserve(out.size() + 8 * payload.size());
  for (double v : payload) put_u64(out, std::bit_cast<std::uint64_t>(v));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

CheckpointBlob read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  Reader r(bytes);
  if (r.take(4, "magic") != std::string(kCheckpointMagic, 4)) throw FormatError("bad checkpoint magic in " + path.string());
  const auto version = static_cast<std::uint32_t>(r.get(4, "version"));
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = r.get(8, "header length");
  CheckpointBlob blob;
  try {
    blob.header = nlohmann::json::parse(r.take(header_len, "header"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::uint64_t count = r.get(8, "payload length");
  if (r.remaining() / 8 < count) throw FormatError("checkpoint truncated while reading payload");
  blob.payload.resize(count);
  for (auto& v : blob.payload) v = std::bit_cast<double>(r.get(8, "payload"));
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload");
  return blob;
}

}  // namespace rei
