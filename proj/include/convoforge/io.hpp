#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "convoforge/common.hpp"
#include "convoforge/rng.hpp"

namespace convoforge::io {

namespace fs = std::filesystem;

// Optional read audit. When enabled, every file read issued through this
// facade is recorded; tests use it to prove a stage touches only its
// declared inputs.
class ReadAudit {
 public:
  static ReadAudit& instance() {
    static ReadAudit a;
    return a;
  }

  void enable() {
    std::lock_guard<std::mutex> lock(mu_);
    enabled_ = true;
    reads_.clear();
  }

  void disable() {
    std::lock_guard<std::mutex> lock(mu_);
    enabled_ = false;
  }

  void record(const fs::path& p) {
    std::lock_guard<std::mutex> lock(mu_);
    if (enabled_) reads_.insert(fs::weakly_canonical(p).string());
  }

  std::set<std::string> reads() const {
    std::lock_guard<std::mutex> lock(mu_);
    return reads_;
  }

 private:
  mutable std::mutex mu_;
  bool enabled_ = false;
  std::set<std::string> reads_;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  ReadAudit::instance().record(path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure: " + path.string());
  return data;
}

// Write via temp file + rename so readers never observe partial content.
inline void write_file_atomic(const fs::path& path, std::string_view data) {
  fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failure: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void append_line(const fs::path& path, std::string_view line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open for append: " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  if (!out) throw IoError("append failure: " + path.string());
}

inline std::string digest_bytes(std::string_view data) {
  return hex64(fnv1a64(data));
}

inline std::string digest_file(const fs::path& path) {
  return digest_bytes(read_file(path));
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::string data = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= data.size(); ++i) {
    if (i == data.size() || data[i] == '\n') {
      std::string line = data.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      start = i + 1;
    }
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// Exclusive corpus lock. Held for the lifetime of a CLI stage invocation.
class LockFile {
 public:
  explicit LockFile(const fs::path& path) : path_(path) {
    if (fs::exists(path_)) {
      throw StageError("corpus is locked by another run (remove " +
                       path_.string() + " if stale)");
    }
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create lock file: " + path_.string());
    out << "locked\n";
    held_ = true;
  }

  ~LockFile() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }

  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  fs::path path_;
  bool held_ = false;
};

}  // namespace convoforge::io
