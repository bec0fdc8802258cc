#pragma once

// Little helpers for the binary snapshot formats: a growable byte sink, a
// bounds-checked reader and a 64-bit FNV-1a checksum.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "hazardstream/errors.hpp"

namespace hazardstream::detail {

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  void put_raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    put_raw(s);
  }

  void put_doubles(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    buf_.insert(buf_.end(), p, p + v.size_bytes());
  }

  void put_bytes(std::span<const std::uint8_t> b) {
    put<std::uint64_t>(b.size());
    buf_.insert(buf_.end(), b.begin(), b.end());
  }

  /// Appends the FNV-1a checksum of everything written so far.
  void seal() { put<std::uint64_t>(fnv1a64(buf_)); }

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : buf_(b) {}

  /// Verifies and strips the trailing checksum written by ByteWriter::seal.
  static ByteReader sealed(std::span<const std::uint8_t> b) {
    if (b.size() < sizeof(std::uint64_t)) throw snapshot_error("snapshot: truncated data");
    const auto body = b.first(b.size() - sizeof(std::uint64_t));
    std::uint64_t stored = 0;
    std::memcpy(&stored, b.data() + body.size(), sizeof stored);
    if (stored != fnv1a64(body)) throw snapshot_error("snapshot: checksum mismatch");
    return ByteReader(body);
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::string get_string() { return get_raw(get_count(1)); }

  std::vector<double> get_doubles() {
    const auto n = get_count(sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }

  std::vector<std::uint8_t> get_bytes() {
    const auto n = get_count(1);
    std::vector<std::uint8_t> v(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }

  [[nodiscard]] bool done() const { return pos_ == buf_.size(); }

 private:
  std::size_t get_count(std::size_t elem) {
    const auto n = get<std::uint64_t>();
    if (n > (buf_.size() - pos_) / elem) throw snapshot_error("snapshot: truncated data");
    return static_cast<std::size_t>(n);
  }

  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw snapshot_error("snapshot: truncated data");
  }

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace hazardstream::detail
