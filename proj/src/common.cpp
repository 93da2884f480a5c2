#include "ddinfer/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

namespace ddinfer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::NonDegeneracy: return "non-degeneracy violated";
    case ErrorKind::SubspaceDimension: return "subspace dimension";
    case ErrorKind::NotFinite: return "measure not finite";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::GridTooLarge: return "grid too large";
    case ErrorKind::Parse: return "parse error";
  }
  return "unknown";
}

namespace {

double pairwise_sum_impl(const double* xs, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += xs[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(xs, half) + pairwise_sum_impl(xs + half, n - half);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise_sum_impl(xs.data(), xs.size());
}

double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  std::vector<double> shifted(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) shifted[i] = std::exp(xs[i] - hi);
  return hi + std::log(pairwise_sum(shifted));
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL))) {}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_));
}

double CounterRng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

void standard_normals(std::uint64_t seed, std::uint64_t stream, std::span<double> out) {
  CounterRng rng(seed, stream);
  for (double& x : out) x = rng.normal();
}

}  // namespace ddinfer
