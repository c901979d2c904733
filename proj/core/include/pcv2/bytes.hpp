#pragma once

#include <cstring>
#include <span>
#include <vector>

#include "pcv2/common.hpp"

namespace pcv2 {

// All multi-byte fields in container formats are little-endian; these two
// classes are the only code that touches byte order.
class ByteWriter {
 public:
  void put_u8(u8 v) { buf_.push_back(v); }
  void put_u16(u16 v) {
    put_u8(static_cast<u8>(v));
    put_u8(static_cast<u8>(v >> 8));
  }
  void put_u32(u32 v) {
    put_u16(static_cast<u16>(v));
    put_u16(static_cast<u16>(v >> 16));
  }
  void put_u64(u64 v) {
    put_u32(static_cast<u32>(v));
    put_u32(static_cast<u32>(v >> 32));
  }
  void put_f32(float v) {
    u32 bits;
    std::memcpy(&bits, &v, 4);
    put_u32(bits);
  }
  void put_bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const u8*>(data);
    buf_.insert(buf_.end(), p, p + len);
  }
  void put_magic(const char magic[4]) { put_bytes(magic, 4); }

  const std::vector<u8>& bytes() const { return buf_; }
  std::vector<u8> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<u8> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const u8> data) : data_(data) {}

  u8 get_u8() {
    require(pos_ < data_.size(), "byte stream truncated at offset ", pos_);
    return data_[pos_++];
  }
  u16 get_u16() {
    u16 lo = get_u8();
    return static_cast<u16>(lo | (static_cast<u16>(get_u8()) << 8));
  }
  u32 get_u32() {
    u32 lo = get_u16();
    return lo | (static_cast<u32>(get_u16()) << 16);
  }
  u64 get_u64() {
    u64 lo = get_u32();
    return lo | (static_cast<u64>(get_u32()) << 32);
  }
  float get_f32() {
    u32 bits = get_u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void get_bytes(void* out, std::size_t len) {
    require(pos_ + len <= data_.size(), "byte stream truncated at offset ", pos_);
    std::memcpy(out, data_.data() + pos_, len);
    pos_ += len;
  }
  void expect_magic(const char magic[4], const char* what) {
    char got[4];
    get_bytes(got, 4);
    require(std::memcmp(got, magic, 4) == 0, what, ": bad magic");
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const u8> data_;
  std::size_t pos_ = 0;
};

}  // namespace pcv2
