#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "mpqmc/errors.hpp"

namespace mpqmc {

enum class StreamKind { PseudoRandom, CudLfsr, VanDerCorput };

const char* stream_kind_name(StreamKind k);

// A seekable scalar stream of uniforms in (0,1). PseudoRandom is a
// counter-based splitmix64 generator (stateless per index, so clones and
// reruns agree exactly). CudLfsr materializes one full period 2^m - 1 of a
// maximal-length shift register; VanDerCorput is the radical-inverse sequence.
class UniformStream {
 public:
  static UniformStream pseudo_random(std::uint64_t seed);
  static UniformStream van_der_corput(unsigned base = 2);

  double next();
  StreamKind kind() const { return kind_; }
  std::uint64_t cursor() const { return cursor_; }
  bool finite() const { return kind_ == StreamKind::CudLfsr; }
  // Period length for the finite kind, 0 for unbounded streams.
  std::uint64_t length() const { return values_ ? values_->size() : 0; }
  unsigned register_size() const { return m_; }
  std::uint64_t seed() const { return seed_; }

  // Random access into the materialized period (CudLfsr only).
  const std::vector<double>& values() const;
  std::shared_ptr<const std::vector<double>> shared_values() const { return values_; }

 private:
  friend UniformStream build_lfsr_cud(unsigned m, std::uint64_t seed);
  UniformStream() = default;

  StreamKind kind_ = StreamKind::PseudoRandom;
  std::uint64_t seed_ = 0;
  std::uint64_t cursor_ = 0;
  unsigned base_ = 2;
  unsigned m_ = 0;
  std::shared_ptr<const std::vector<double>> values_;
};

// Builds the full-period LFSR sequence for register size m. One primitive
// polynomial per m in [10, 20] is embedded; other sizes raise
// UnsupportedRegisterSize. The seed picks the starting state (a cyclic shift
// of the period, which preserves equidistribution).
UniformStream build_lfsr_cud(unsigned m, std::uint64_t seed = 1);

// The embedded tap table, exposed so tests can verify full period per entry.
std::vector<unsigned> lfsr_table_sizes();

// Value used for the prepended starting tuple of a schedule.
inline constexpr double kNearZeroUniform = 0x1p-32;

// Consumption plan for a finite CUD stream: trim the period to T = floor(L/d)*d,
// lay out d cyclically shifted run-throughs of the trimmed sequence, cut each
// into width-d tuples, and prepend one near-zero tuple. Every width-d window
// of the (cyclic) trimmed sequence appears exactly once. Tuples are served in
// schedule order, scalar by scalar.
class TupleSchedule {
 public:
  TupleSchedule(const UniformStream& base, std::size_t width);

  std::size_t width() const { return d_; }
  std::uint64_t trimmed_length() const { return T_; }
  std::uint64_t tuple_count() const { return T_ + 1; }
  std::uint64_t scalar_count() const { return (T_ + 1) * d_; }

  double next();  // throws SequenceExhausted past the last tuple
  std::uint64_t cursor() const { return cursor_; }

  double scalar_at(std::uint64_t i) const;
  void tuple_at(std::uint64_t t, double* out) const;

 private:
  std::shared_ptr<const std::vector<double>> base_;
  std::size_t d_ = 0;
  std::uint64_t T_ = 0;
  std::uint64_t cursor_ = 0;
};

TupleSchedule make_tuple_schedule(const UniformStream& base, std::size_t width);

// What the samplers consume from: either a raw pseudo-random stream or a CUD
// tuple schedule. Finite sources throw SequenceExhausted when overrun.
class DrivingSource {
 public:
  explicit DrivingSource(UniformStream s) : impl_(std::move(s)) {}
  explicit DrivingSource(TupleSchedule s) : impl_(std::move(s)) {}

  double next();
  bool finite() const { return std::holds_alternative<TupleSchedule>(impl_); }
  std::uint64_t consumed() const;
  // Tuples available per iteration budgeting; 0 for unbounded sources.
  std::uint64_t tuple_count() const;
  // Schedule tuple width; 0 for unbounded sources. Samplers insist this
  // matches their per-iteration consumption so the CUD structure survives.
  std::size_t tuple_width() const;
  StreamKind stream_kind() const;

 private:
  std::variant<UniformStream, TupleSchedule> impl_;
};

}  // namespace mpqmc
