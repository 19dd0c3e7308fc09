#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>

#include "cslide/core.hpp"
#include "cslide/encode.hpp"

namespace cslide {

struct StoreStats {
  std::uint64_t entries = 0;  // live entries
  std::uint64_t bytes = 0;    // total stored output bytes
  std::uint64_t hits = 0;     // per-run counters, reset by begin_run
  std::uint64_t misses = 0;
  std::uint64_t puts = 0;
};

/// Persistent content-addressed cache of task outputs, keyed by TaskId.
/// Retention policy is keep-latest-run: every get/put marks its entry with
/// the current run epoch, and end_run_evict() sweeps everything the run did
/// not touch. get/put are safe from concurrent workers; begin_run,
/// end_run_evict, persist and load require exclusive access.
class MemoStore {
 public:
  // File format (bit-exact):
  //   magic "CSLM" | version u32 BE
  //   | header section: length u64 BE | bytes | SHA-256(bytes)
  //   | entry count u64 BE
  //   | per entry: kind u8 | fn_id 32B | input_fp 32B | output length u64 BE
  //                | output bytes | SHA-256 of the preceding entry bytes
  static constexpr char kMagic[4] = {'C', 'S', 'L', 'M'};
  static constexpr std::uint32_t kVersion = 1;

  MemoStore() = default;
  MemoStore(MemoStore&& other) noexcept { *this = std::move(other); }
  MemoStore& operator=(MemoStore&& other) noexcept {
    if (this != &other) {
      entries_ = std::move(other.entries_);
      epoch_ = other.epoch_;
      bytes_ = other.bytes_;
      hits_ = other.hits_.load();
      misses_ = other.misses_.load();
      puts_ = other.puts_.load();
    }
    return *this;
  }
  MemoStore(const MemoStore&) = delete;
  MemoStore& operator=(const MemoStore&) = delete;

  /// Starts a new run epoch and resets the per-run counters.
  void begin_run() {
    std::unique_lock lock(mutex_);
    ++epoch_;
    hits_ = 0;
    misses_ = 0;
    puts_ = 0;
  }

  /// Returns the stored output for the task, marking it live in the current
  /// epoch. Absent tasks count as misses.
  std::optional<Bytes> get(const TaskId& id) {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) {
      misses_.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    it->second.epoch.store(epoch_, std::memory_order_relaxed);
    hits_.fetch_add(1, std::memory_order_relaxed);
    return it->second.output;
  }

  /// Stores output under the task id. Overwriting an identical key is
  /// idempotent; the entry is marked live in the current epoch either way.
  void put(const TaskId& id, Bytes output) {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(id, Entry{});
    if (inserted) {
      bytes_ += output.size();
      it->second.output = std::move(output);
    } else if (it->second.output != output) {
      bytes_ += output.size();
      bytes_ -= it->second.output.size();
      it->second.output = std::move(output);
    }
    it->second.epoch.store(epoch_, std::memory_order_relaxed);
    puts_.fetch_add(1, std::memory_order_relaxed);
  }

  bool contains(const TaskId& id) const {
    std::shared_lock lock(mutex_);
    return entries_.find(id) != entries_.end();
  }

  /// Removes every entry the just-completed run did not touch. Returns the
  /// number of evicted entries.
  std::uint64_t end_run_evict() {
    std::unique_lock lock(mutex_);
    std::uint64_t evicted = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->second.epoch.load(std::memory_order_relaxed) < epoch_) {
        bytes_ -= it->second.output.size();
        it = entries_.erase(it);
        ++evicted;
      } else {
        ++it;
      }
    }
    return evicted;
  }

  StoreStats stats() const {
    std::shared_lock lock(mutex_);
    StoreStats s;
    s.entries = entries_.size();
    s.bytes = bytes_;
    s.hits = hits_.load();
    s.misses = misses_.load();
    s.puts = puts_.load();
    return s;
  }

  /// Writes the store plus an opaque header section to path. The write goes
  /// through a temp file and rename so a crash never leaves a torn file.
  void persist(const std::filesystem::path& path,
               std::string_view header_section = {}) const {
    std::shared_lock lock(mutex_);
    Bytes out;
    out.append(kMagic, sizeof(kMagic));
    detail::append_u32_be(out, kVersion);
    detail::append_u64_be(out, header_section.size());
    out.append(header_section);
    Fingerprint header_fp = fingerprint(header_section);
    out.append(reinterpret_cast<const char*>(header_fp.digest.data()),
               header_fp.digest.size());
    detail::append_u64_be(out, entries_.size());
    for (const auto& [id, entry] : entries_) {
      Bytes frame;
      frame.push_back(static_cast<char>(id.kind));
      frame.append(reinterpret_cast<const char*>(id.fn_id.digest.data()),
                   id.fn_id.digest.size());
      frame.append(reinterpret_cast<const char*>(id.input_fp.digest.data()),
                   id.input_fp.digest.size());
      detail::append_u64_be(frame, entry.output.size());
      frame.append(entry.output);
      Fingerprint sum = fingerprint(frame);
      out.append(frame);
      out.append(reinterpret_cast<const char*>(sum.digest.data()),
                 sum.digest.size());
    }

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw StorageError("cannot open " + tmp.string() + " for write");
      f.write(out.data(), static_cast<std::streamsize>(out.size()));
      if (!f) throw StorageError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw StorageError("rename failed: " + ec.message());
  }

  /// Loads a store persisted by persist(). Validates magic, version and
  /// every checksum before adopting anything; a bad file loads nothing.
  static std::pair<MemoStore, Bytes> load(const std::filesystem::path& path) {
    Bytes buf;
    {
      std::ifstream f(path, std::ios::binary);
      if (!f) throw StorageError("cannot open " + path.string());
      buf.assign(std::istreambuf_iterator<char>(f),
                 std::istreambuf_iterator<char>());
      if (f.bad()) throw StorageError("read failed: " + path.string());
    }

    detail::Reader r(buf);
    try {
      if (r.raw(4) != std::string_view(kMagic, 4)) {
        throw CorruptFileError("bad magic");
      }
      if (r.u32_be() != kVersion) throw CorruptFileError("unsupported version");

      std::uint64_t header_len = r.u64_be();
      Bytes header(r.raw(header_len));
      Fingerprint header_fp;
      std::string_view sum = r.raw(header_fp.digest.size());
      std::memcpy(header_fp.digest.data(), sum.data(), header_fp.digest.size());
      if (header_fp != fingerprint(header)) {
        throw CorruptFileError("header checksum mismatch");
      }

      std::uint64_t count = r.u64_be();
      MemoStore store;
      store.entries_.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        Bytes frame;
        TaskId id;
        std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(TaskKind::Reduce)) {
          throw CorruptFileError("bad task kind");
        }
        id.kind = static_cast<TaskKind>(kind);
        frame.push_back(static_cast<char>(kind));
        std::string_view fn = r.raw(id.fn_id.digest.size());
        std::memcpy(id.fn_id.digest.data(), fn.data(), id.fn_id.digest.size());
        frame.append(fn);
        std::string_view in = r.raw(id.input_fp.digest.size());
        std::memcpy(id.input_fp.digest.data(), in.data(),
                    id.input_fp.digest.size());
        frame.append(in);
        std::uint64_t out_len = r.u64_be();
        detail::append_u64_be(frame, out_len);
        std::string_view output = r.raw(out_len);
        frame.append(output);
        Fingerprint entry_fp;
        std::string_view entry_sum = r.raw(entry_fp.digest.size());
        std::memcpy(entry_fp.digest.data(), entry_sum.data(),
                    entry_fp.digest.size());
        if (entry_fp != fingerprint(frame)) {
          throw CorruptFileError("entry checksum mismatch");
        }
        Entry e;
        e.output = Bytes(output);
        e.epoch.store(0);
        store.bytes_ += out_len;
        if (!store.entries_.emplace(id, std::move(e)).second) {
          throw CorruptFileError("duplicate entry");
        }
      }
      if (!r.done()) throw CorruptFileError("trailing bytes");
      return {std::move(store), std::move(header)};
    } catch (const CorruptFileError&) {
      throw;
    } catch (const Error&) {
      // Reader truncation surfaces as CorruptFileError already; anything
      // else at this layer is equally a corrupt file.
      throw CorruptFileError("memo file truncated or malformed");
    }
  }

 private:
  struct Entry {
    Bytes output;
    std::atomic<std::uint64_t> epoch{0};

    Entry() = default;
    Entry(Entry&& other) noexcept
        : output(std::move(other.output)), epoch(other.epoch.load()) {}
  };

  mutable std::shared_mutex mutex_;
  std::unordered_map<TaskId, Entry, TaskIdHash> entries_;
  std::uint64_t epoch_ = 0;
  std::uint64_t bytes_ = 0;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> puts_{0};
};

}  // namespace cslide
