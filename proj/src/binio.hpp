#pragma once

// Little-endian raw binary helpers for the cache and checkpoint files.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "aghint/common.hpp"

namespace aghint::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class T>
  void value(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void string(const std::string& s) {
    value<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <class T>
  void array(const std::vector<T>& v) {
    value<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  template <class T>
  void raw(const T* data, std::size_t count) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string file) : in_(in), file_(std::move(file)) {}
  template <class T>
  T value() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  std::string string() {
    const auto n = checked_size(value<std::uint64_t>());
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  template <class T>
  std::vector<T> array() {
    const auto n = checked_size(value<std::uint64_t>() * sizeof(T)) / sizeof(T);
    std::vector<T> v(n);
    read(v.data(), n * sizeof(T));
    return v;
  }
  template <class T>
  void raw(T* data, std::size_t count) {
    read(data, count * sizeof(T));
  }

 private:
  std::size_t checked_size(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 40)) throw DataError(fmt::format("{}: corrupt length field", file_));
    return static_cast<std::size_t>(n);
  }
  void read(void* dst, std::size_t bytes) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in_.gcount()) != bytes) throw DataError(fmt::format("{}: truncated file", file_));
  }
  std::ifstream& in_;
  std::string file_;
};

}  // namespace aghint::binio
