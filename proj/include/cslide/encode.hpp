#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "cslide/core.hpp"

namespace cslide {

// Canonical byte encoding shared by fingerprinting and the memo store keys.
// Layout, bit-exact:
//   [1 type-tag byte][fields, each as 4-byte big-endian length prefix + raw
//   bytes][for lists: 4-byte big-endian element count before the elements]
// Tag + length prefixes make the encoding injective per type by
// construction: no two distinct well-formed values share an encoding.

inline constexpr std::uint8_t kTagRecord = 0x01;
inline constexpr std::uint8_t kTagKVPair = 0x02;
inline constexpr std::uint8_t kTagKVList = 0x03;
inline constexpr std::uint8_t kTagValueList = 0x04;   // tree-node payload
inline constexpr std::uint8_t kTagKeyedValues = 0x05; // combine/reduce input

namespace detail {

inline void append_u32_be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

inline void append_u64_be(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xFF));
  }
}

inline void append_field(Bytes& out, std::string_view bytes) {
  if (bytes.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidInputError("field exceeds 4 GiB encoding limit");
  }
  append_u32_be(out, static_cast<std::uint32_t>(bytes.size()));
  out.append(bytes);
}

class Reader {
 public:
  explicit Reader(std::string_view buf) : buf_(buf) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  std::uint32_t u32_be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v = (v << 8) | static_cast<std::uint8_t>(buf_[pos_++]);
    }
    return v;
  }

  std::uint64_t u64_be() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v = (v << 8) | static_cast<std::uint8_t>(buf_[pos_++]);
    }
    return v;
  }

  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string_view field() {
    std::uint32_t len = u32_be();
    need(len);
    std::string_view out = buf_.substr(pos_, len);
    pos_ += len;
    return out;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) {
      throw CorruptFileError("canonical encoding truncated");
    }
  }

  std::string_view buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Bytes encode_record(const Record& r) {
  Bytes out;
  out.reserve(5 + r.bytes.size());
  out.push_back(static_cast<char>(kTagRecord));
  detail::append_field(out, r.bytes);
  return out;
}

inline Bytes encode_kv(const KVPair& kv) {
  Bytes out;
  out.reserve(9 + kv.key.size() + kv.value.size());
  out.push_back(static_cast<char>(kTagKVPair));
  detail::append_field(out, kv.key);
  detail::append_field(out, kv.value);
  return out;
}

inline Bytes encode_kv_list(std::span<const KVPair> pairs) {
  Bytes out;
  out.push_back(static_cast<char>(kTagKVList));
  detail::append_u32_be(out, static_cast<std::uint32_t>(pairs.size()));
  for (const KVPair& kv : pairs) {
    detail::append_field(out, kv.key);
    detail::append_field(out, kv.value);
  }
  return out;
}

/// Ordered list of opaque values: a tree-node payload, or a split's records.
inline Bytes encode_values(std::span<const Bytes> values) {
  Bytes out;
  out.push_back(static_cast<char>(kTagValueList));
  detail::append_u32_be(out, static_cast<std::uint32_t>(values.size()));
  for (const Bytes& v : values) detail::append_field(out, v);
  return out;
}

/// Key plus ordered values: the input of a Combine or Reduce application.
inline Bytes encode_keyed_values(std::string_view key,
                                 std::span<const Bytes> values) {
  Bytes out;
  out.push_back(static_cast<char>(kTagKeyedValues));
  detail::append_field(out, key);
  detail::append_u32_be(out, static_cast<std::uint32_t>(values.size()));
  for (const Bytes& v : values) detail::append_field(out, v);
  return out;
}

/// Inverse of encode_kv_list. Throws CorruptFileError on malformed bytes.
inline std::vector<KVPair> decode_kv_list(std::string_view buf) {
  detail::Reader r(buf);
  if (r.u8() != kTagKVList) throw CorruptFileError("bad kv-list tag");
  std::uint32_t count = r.u32_be();
  std::vector<KVPair> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    KVPair kv;
    kv.key = Bytes(r.field());
    kv.value = Bytes(r.field());
    out.push_back(std::move(kv));
  }
  if (!r.done()) throw CorruptFileError("trailing bytes after kv list");
  return out;
}

/// Inverse of encode_values.
inline std::vector<Bytes> decode_values(std::string_view buf) {
  detail::Reader r(buf);
  if (r.u8() != kTagValueList) throw CorruptFileError("bad value-list tag");
  std::uint32_t count = r.u32_be();
  std::vector<Bytes> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.emplace_back(r.field());
  if (!r.done()) throw CorruptFileError("trailing bytes after value list");
  return out;
}

}  // namespace cslide
