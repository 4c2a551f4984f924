#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aghint {

// Exit-code category carried by every error the pipeline throws.
enum class ErrorKind : int { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

// Random streams. Every subsystem draws from its own stream derived from the
// root seed, so changing one consumer never shifts another.
enum class Stream : std::uint64_t {
  synth = 1,
  split = 2,
  init = 3,
  dropout = 4,
  shuffle = 5,
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0) noexcept;

// Counter-based uniform in [0, 1): a pure function of (key, counter).
double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept;

// Incremental SHA-256, hex-encoded.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(const void* data, std::size_t size);
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }
  template <class T>
  Sha256& update_span(std::span<const T> values) {
    return update(values.data(), values.size_bytes());
  }
  template <class T>
  Sha256& update_value(const T& v) {
    return update(&v, sizeof(T));
  }
  std::string hex();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view data);

// Worker-count control shared by every OpenMP kernel. 0 = runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace aghint
