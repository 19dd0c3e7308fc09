#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

namespace cslide {

// Opaque byte strings everywhere: records, keys, values and encodings are
// all untyped bytes. std::string is the byte-string carrier.
using Bytes = std::string;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input handed to the library (empty record, duplicate chunk id,
/// bad flag-level configuration). CLI maps this to a usage error.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// An update operation that the active window mode does not permit.
class ModeViolationError : public Error {
 public:
  using Error::Error;
};

/// A user-defined Map/Combine/Reduce function failed or broke its contract.
class WorkloadError : public Error {
 public:
  using Error::Error;
};

/// Memo file failed validation (bad magic, version, checksum, truncation).
class CorruptFileError : public Error {
 public:
  using Error::Error;
};

/// Underlying file I/O failure.
class StorageError : public Error {
 public:
  using Error::Error;
};

/// A node the previous run memoized is missing from the store. Clean nodes
/// must always be servable from memo; a miss means the cache is incoherent.
class CacheCoherenceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// The unit the Map function consumes. Must be non-empty.
struct Record {
  Bytes bytes;

  friend bool operator==(const Record&, const Record&) = default;
};

/// An identified group of records. Ids are assigned by the ingestion layer
/// (sequential counters), never content-derived, so a chunk keeps its
/// position identity when its contents are replaced.
struct Chunk {
  std::uint64_t id = 0;
  std::vector<Record> records;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct KVPair {
  Bytes key;    // non-empty
  Bytes value;  // may be empty

  friend bool operator==(const KVPair&, const KVPair&) = default;
  friend auto operator<=>(const KVPair&, const KVPair&) = default;
};

/// 32-byte content hash. Equal inputs yield equal fingerprints; distinct
/// inputs collide with cryptographically negligible probability.
struct Fingerprint {
  std::array<std::uint8_t, 32> digest{};

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
  friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;

  /// Lowercase hex, for logs and reports.
  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint8_t b : digest) {
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xF]);
    }
    return out;
  }

  /// First 8 digest bytes as a big-endian integer. Stable across platforms.
  std::uint64_t prefix64() const {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x = (x << 8) | digest[static_cast<std::size_t>(i)];
    return x;
  }
};

struct FingerprintHash {
  std::size_t operator()(const Fingerprint& fp) const noexcept {
    std::uint64_t x;
    std::memcpy(&x, fp.digest.data(), sizeof(x));
    return static_cast<std::size_t>(x);
  }
};

/// SHA-256 of the given bytes. Deterministic across runs and platforms.
inline Fingerprint fingerprint(std::string_view bytes) {
  Fingerprint fp;
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), fp.digest.data(), &len,
                 EVP_sha256(), nullptr) != 1 ||
      len != fp.digest.size()) {
    throw Error("SHA-256 digest failed");
  }
  return fp;
}

enum class TaskKind : std::uint8_t { Map = 0, Combine = 1, Reduce = 2 };

inline const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Map: return "map";
    case TaskKind::Combine: return "combine";
    case TaskKind::Reduce: return "reduce";
  }
  return "?";
}

/// Identity of one task application: what function, of which registered
/// version, over which input bytes. Two tasks with equal TaskIds compute the
/// same result; the memo store is keyed by this.
struct TaskId {
  TaskKind kind = TaskKind::Map;
  Fingerprint fn_id;
  Fingerprint input_fp;

  friend bool operator==(const TaskId&, const TaskId&) = default;
};

struct TaskIdHash {
  std::size_t operator()(const TaskId& t) const noexcept {
    std::uint64_t a;
    std::uint64_t b;
    std::memcpy(&a, t.input_fp.digest.data(), sizeof(a));
    std::memcpy(&b, t.fn_id.digest.data(), sizeof(b));
    return static_cast<std::size_t>(a ^ (b * 0x9e3779b97f4a7c15ULL) ^
                                    static_cast<std::uint64_t>(t.kind));
  }
};

/// Per-run accounting. For each task kind, `*_run` counts tasks executed
/// fresh this run and `*_hit` counts tasks served from memo; run + hit is the
/// total task count of that kind (N_M, N_C, N_R).
struct RunStats {
  std::uint64_t n_i = 0;    // input size in records
  std::uint64_t n_m = 0;    // map-emitted key-value pairs
  std::uint64_t n_mk = 0;   // distinct map-emitted keys
  std::uint64_t n_o = 0;    // final output pairs

  std::uint64_t map_run = 0;
  std::uint64_t map_hit = 0;
  std::uint64_t combine_run = 0;
  std::uint64_t combine_hit = 0;
  std::uint64_t reduce_run = 0;
  std::uint64_t reduce_hit = 0;

  /// Total combiner-tree node count for the run (= combine_run + combine_hit).
  std::uint64_t combine_stages = 0;

  std::uint64_t map_tasks() const { return map_run + map_hit; }          // N_M
  std::uint64_t combine_tasks() const { return combine_run + combine_hit; }  // N_C
  std::uint64_t reduce_tasks() const { return reduce_run + reduce_hit; }     // N_R
  std::uint64_t fresh_tasks() const { return map_run + combine_run + reduce_run; }

  friend bool operator==(const RunStats&, const RunStats&) = default;
};

}  // namespace cslide
