#include "mpqmc/driving.hpp"

#include <bit>

#include "mpqmc/mathutil.hpp"

namespace mpqmc {

const char* stream_kind_name(StreamKind k) {
  switch (k) {
    case StreamKind::PseudoRandom: return "pseudo_random";
    case StreamKind::CudLfsr: return "cud_lfsr";
    case StreamKind::VanDerCorput: return "van_der_corput";
  }
  return "?";
}

namespace {

// One primitive polynomial per register size, given as exponent sets of the
// nonzero terms above x^0. A unit test walks every entry through its full
// period, which is equivalent to primitivity for this recurrence.
//
// Emitting the register once per shift leaves consecutive outputs related by
// u' = u/2 (+1/2), a two-line structure with pair discrepancy stuck near 1/8.
// Each output therefore advances the register `step` times, Tausworthe style;
// gcd(step, 2^m-1) = 1 keeps the decimated orbit a single full cycle. The
// steps below minimize the exact star discrepancy of the first 4096
// overlapping and non-overlapping output pairs over step in [1, 48].
struct LfsrEntry {
  unsigned m;
  std::uint32_t taps;  // bit m-e set for each term x^e, so x^m lands on bit 0
  unsigned step;
};

constexpr std::uint32_t tapbits(std::initializer_list<unsigned> exps) {
  unsigned m = 0;
  for (unsigned e : exps) m = e > m ? e : m;
  std::uint32_t mask = 0;
  for (unsigned e : exps) mask |= 1u << (m - e);
  return mask;
}

const LfsrEntry kLfsrTable[] = {
    {10, tapbits({10, 3}), 7},
    {11, tapbits({11, 2}), 24},
    {12, tapbits({12, 6, 4, 1}), 37},
    {13, tapbits({13, 4, 3, 1}), 19},
    {14, tapbits({14, 5, 3, 1}), 20},
    {15, tapbits({15, 1}), 39},
    {16, tapbits({16, 5, 3, 2}), 31},
    {17, tapbits({17, 3}), 24},
    {18, tapbits({18, 7}), 17},
    {19, tapbits({19, 5, 2, 1}), 37},
    {20, tapbits({20, 3}), 28},
};

double counter_uniform(std::uint64_t seed, std::uint64_t i) {
  // splitmix64 stream: state seed, i-th output. The half-ulp offset keeps the
  // result strictly inside (0,1).
  const std::uint64_t z = mix64(seed + i * 0x9e3779b97f4a7c15ull);
  return (static_cast<double>(z >> 11) + 0.5) * 0x1p-53;
}

double radical_inverse(std::uint64_t n, unsigned base) {
  double v = 0.0;
  double f = 1.0 / base;
  while (n > 0) {
    v += static_cast<double>(n % base) * f;
    n /= base;
    f /= base;
  }
  return v;
}

}  // namespace

UniformStream UniformStream::pseudo_random(std::uint64_t seed) {
  UniformStream s;
  s.kind_ = StreamKind::PseudoRandom;
  s.seed_ = seed;
  return s;
}

UniformStream UniformStream::van_der_corput(unsigned base) {
  if (base < 2) fail(Errc::InvalidWidth, "van der Corput base must be >= 2");
  UniformStream s;
  s.kind_ = StreamKind::VanDerCorput;
  s.base_ = base;
  return s;
}

double UniformStream::next() {
  switch (kind_) {
    case StreamKind::PseudoRandom:
      return counter_uniform(seed_, cursor_++);
    case StreamKind::VanDerCorput:
      return radical_inverse(++cursor_, base_);
    case StreamKind::CudLfsr: {
      if (cursor_ >= values_->size())
        fail(Errc::SequenceExhausted, "LFSR period fully consumed");
      return (*values_)[cursor_++];
    }
  }
  fail(Errc::WrongMode, "unreachable stream kind");
}

const std::vector<double>& UniformStream::values() const {
  if (!values_) fail(Errc::WrongMode, "stream has no materialized period");
  return *values_;
}

std::vector<unsigned> lfsr_table_sizes() {
  std::vector<unsigned> out;
  for (const auto& e : kLfsrTable) out.push_back(e.m);
  return out;
}

UniformStream build_lfsr_cud(unsigned m, std::uint64_t seed) {
  const LfsrEntry* entry = nullptr;
  for (const auto& e : kLfsrTable)
    if (e.m == m) entry = &e;
  if (!entry)
    fail(Errc::UnsupportedRegisterSize,
         "no primitive polynomial embedded for m=" + std::to_string(m));

  const std::uint64_t period = (1ull << m) - 1;
  std::uint32_t state = static_cast<std::uint32_t>(1 + (seed - 1) % period);
  const double scale = 1.0 / static_cast<double>(1ull << m);

  auto vals = std::make_shared<std::vector<double>>();
  vals->reserve(period);
  for (std::uint64_t i = 0; i < period; ++i) {
    vals->push_back(static_cast<double>(state) * scale);
    for (unsigned k = 0; k < entry->step; ++k) {
      const std::uint32_t fb = std::popcount(state & entry->taps) & 1u;
      state = (state >> 1) | (fb << (m - 1));
    }
  }

  UniformStream s;
  s.kind_ = StreamKind::CudLfsr;
  s.seed_ = seed;
  s.m_ = m;
  s.values_ = std::move(vals);
  return s;
}

TupleSchedule::TupleSchedule(const UniformStream& base, std::size_t width) {
  if (base.kind() != StreamKind::CudLfsr)
    fail(Errc::WrongMode, "tuple schedules need a finite CUD stream");
  const std::uint64_t L = base.length();
  if (width < 1 || width > L)
    fail(Errc::InvalidWidth,
         "tuple width " + std::to_string(width) + " not in [1, " + std::to_string(L) + "]");
  base_ = base.shared_values();
  d_ = width;
  T_ = (L / width) * width;
}

double TupleSchedule::scalar_at(std::uint64_t i) const {
  const std::uint64_t t = i / d_;
  const std::size_t k = static_cast<std::size_t>(i % d_);
  if (t >= tuple_count()) fail(Errc::SequenceExhausted, "schedule index past final tuple");
  if (t == 0) return kNearZeroUniform;
  const std::uint64_t data_t = t - 1;
  const std::uint64_t per_rt = T_ / d_;
  const std::uint64_t phase = data_t / per_rt;    // which shifted run-through
  const std::uint64_t block = data_t % per_rt;    // block within the run-through
  const std::uint64_t pos = (phase + block * d_ + k) % T_;
  return (*base_)[static_cast<std::size_t>(pos)];
}

void TupleSchedule::tuple_at(std::uint64_t t, double* out) const {
  for (std::size_t k = 0; k < d_; ++k) out[k] = scalar_at(t * d_ + k);
}

double TupleSchedule::next() {
  if (cursor_ >= scalar_count()) fail(Errc::SequenceExhausted, "CUD schedule fully consumed");
  return scalar_at(cursor_++);
}

TupleSchedule make_tuple_schedule(const UniformStream& base, std::size_t width) {
  return TupleSchedule(base, width);
}

double DrivingSource::next() {
  return std::visit([](auto& s) { return s.next(); }, impl_);
}

std::uint64_t DrivingSource::consumed() const {
  return std::visit([](const auto& s) { return s.cursor(); }, impl_);
}

std::uint64_t DrivingSource::tuple_count() const {
  if (const auto* sched = std::get_if<TupleSchedule>(&impl_)) return sched->tuple_count();
  return 0;
}

std::size_t DrivingSource::tuple_width() const {
  if (const auto* sched = std::get_if<TupleSchedule>(&impl_)) return sched->width();
  return 0;
}

StreamKind DrivingSource::stream_kind() const {
  if (std::holds_alternative<TupleSchedule>(impl_)) return StreamKind::CudLfsr;
  return std::get<UniformStream>(impl_).kind();
}

}  // namespace mpqmc
