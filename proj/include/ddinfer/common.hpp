#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddinfer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  NonDegeneracy,
  SubspaceDimension,
  NotFinite,
  Numerical,
  GridTooLarge,
  Parse,
};

const char* to_string(ErrorKind kind);

/// Structured library error. `kind` drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

/// Deterministic reduction independent of how the input was produced.
double pairwise_sum(std::span<const double> xs);

/// log(sum(exp(xs))) with -inf entries ignored; returns -inf for an empty or
/// all -inf input.
double log_sum_exp(std::span<const double> xs);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

/// Counter-based random streams: the draws for (seed, stream) do not depend on
/// what other streams were consumed, so per-sample streams are reproducible
/// under any scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fills `out` with standard normals from stream (seed, stream).
void standard_normals(std::uint64_t seed, std::uint64_t stream, std::span<double> out);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// independent; callers write results into slot i.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn);

}  // namespace ddinfer

#include "ddinfer/detail/parallel.hpp"
