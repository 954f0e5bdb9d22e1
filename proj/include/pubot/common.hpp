#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pubot {

// Base error for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration, detected before any heavy work.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Copies the listed rows, in the given order.
  Matrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Order-sensitive combination of a seed with further integer parts.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts);

// Stable 64-bit FNV-1a hash of a string, for folding names into seeds.
std::uint64_t hash_string(std::string_view s);

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware concurrency).
// Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace pubot
