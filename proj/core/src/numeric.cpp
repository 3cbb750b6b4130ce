#include "gel/numeric.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gel/errors.hpp"

namespace gel {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

void require_same_length(const Vector& a, const Vector& b, std::string_view what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_length(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
  require_same_length(x, y, "axpy");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

void axpy_inplace(double alpha, const Vector& x, Vector& y) {
  require_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void debug_check_finite([[maybe_unused]] const Vector& v, [[maybe_unused]] std::string_view where) {
#ifndef NDEBUG
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError(std::string(where) + ": non-finite value");
  }
#endif
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view label)
    : master_seed_(master_seed), label_(label) {
  std::uint64_t mix = master_seed ^ fnv1a64(label);
  std::uint64_t x = splitmix64(mix);
  for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t RngStream::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  if (lo > hi) throw DomainError("uniform_int: lo > hi");
  const std::uint64_t span = hi - lo;
  if (span == ~std::uint64_t{0}) return next_u64();
  const std::uint64_t range = span + 1;
  // Reject the tail that would bias the modulo.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return lo + draw % range;
}

double RngStream::normal(double mean, double std) {
  if (std < 0.0) throw DomainError("normal: negative standard deviation");
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std * z;
}

RngStream seeded_stream(std::uint64_t master_seed, std::string_view label) {
  if (label.empty()) throw DomainError("seeded_stream: empty label");
  return RngStream(master_seed, label);
}

Vector sample_normal(RngStream& stream, double mean, double std, std::size_t n) {
  if (std < 0.0) throw DomainError("sample_normal: negative standard deviation");
  if (n == 0) throw DomainError("sample_normal: n must be at least 1");
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = stream.normal(mean, std);
  return out;
}

}  // namespace gel
