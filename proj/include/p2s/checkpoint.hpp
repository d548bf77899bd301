#pragma once

// Parameter checkpoint, version 1. All integers and IEEE-754 doubles little-endian:
//
//   "P2SCKPT\0"  u32 version  u32 bank_count
//   per bank:    u32 name_len  name bytes  u32 out_channels  u32 in_channels  u32 kernel
//                u64 weight_count  f64 weights[]  u64 threshold_count  f64 thresholds[]
//
// Doubles are stored bit-for-bit, so a reload is exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/kernel_bank.hpp"

namespace p2s {

inline constexpr char kCheckpointMagic[8] = {'P', '2', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedBank = std::pair<std::string, KernelBank>;

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void real(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

  std::vector<unsigned char> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(Errc::corrupt_header, "checkpoint truncated");
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const std::vector<NamedBank>& banks) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(banks.size()));
  for (const auto& [name, bank] : banks) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.raw(name.data(), name.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.geometry.out_channels));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.geometry.in_channels));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.geometry.kernel));
    w.uint<std::uint64_t>(bank.weights.size());
    for (double v : bank.weights) w.real(v);
    w.uint<std::uint64_t>(bank.thresholds.size());
    for (double v : bank.thresholds) w.real(v);
  }
  return std::move(w.bytes);
}

inline std::vector<NamedBank> decode_checkpoint(std::vector<unsigned char> bytes) {
  detail::ByteReader r(std::move(bytes));
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    fail(Errc::unsupported_format, "not a checkpoint file");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(Errc::unsupported_format, "unsupported checkpoint version " + std::to_string(version));
  const auto count = r.uint<std::uint32_t>();
  std::vector<NamedBank> banks;
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name(r.uint<std::uint32_t>(), '\0');
    r.raw(name.data(), name.size());
    ConvGeometry g;
    g.out_channels = r.uint<std::uint32_t>();
    g.in_channels = r.uint<std::uint32_t>();
    g.kernel = r.uint<std::uint32_t>();
    KernelBank bank = KernelBank::make(g);
    const auto nw = r.uint<std::uint64_t>();
    if (nw != g.numel()) fail(Errc::corrupt_header, "weight count does not match geometry for bank " + name);
    for (auto& v : bank.weights) v = r.real();
    const auto nt = r.uint<std::uint64_t>();
    if (nt != 0 && nt != bank.num_filters()) fail(Errc::corrupt_header, "threshold count mismatch for bank " + name);
    bank.thresholds.resize(nt);
    for (auto& v : bank.thresholds) v = r.real();
    banks.emplace_back(std::move(name), std::move(bank));
  }
  if (!r.done()) fail(Errc::corrupt_header, "trailing bytes after checkpoint");
  return banks;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedBank>& banks) {
  const auto bytes = encode_checkpoint(banks);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_failure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_failure, "write failed for " + path.string());
}

inline std::vector<NamedBank> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  return decode_checkpoint({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace p2s
