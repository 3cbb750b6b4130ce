#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gel {

// Fixed-length dense vector of doubles. Holds model weights, updates,
// gradients and optimizer moments.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  const std::vector<double>& values() const noexcept { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Throws DimensionError unless a and b have equal length.
void require_same_length(const Vector& a, const Vector& b, std::string_view what);

// Elementwise product a ⊙ b.
Vector hadamard(const Vector& a, const Vector& b);

// alpha * x + y.
Vector axpy(double alpha, const Vector& x, const Vector& y);

// y += alpha * x, in place.
void axpy_inplace(double alpha, const Vector& x, Vector& y);

// Debug-build check that every entry is finite; no-op under NDEBUG.
void debug_check_finite(const Vector& v, std::string_view where);

// Deterministic pseudo-random stream.
//
// A stream is identified by (master_seed, label). The label is hashed with
// 64-bit FNV-1a, mixed with the master seed through SplitMix64, and the
// result seeds a xoshiro256** generator (four SplitMix64 outputs form the
// state). Normal variates use the Box-Muller transform, one draw per pair
// of uniforms, so the sequence only depends on the generator output.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view label);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& label() const noexcept { return label_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() noexcept;
  // Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double normal(double mean, double std);

 private:
  std::uint64_t master_seed_;
  std::string label_;
  std::uint64_t s_[4];
};

// Stream for (master_seed, label). Label must be nonempty.
RngStream seeded_stream(std::uint64_t master_seed, std::string_view label);

// n independent N(mean, std^2) draws. std < 0 is a DomainError.
Vector sample_normal(RngStream& stream, double mean, double std, std::size_t n);

}  // namespace gel
