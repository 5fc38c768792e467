#include "spikedcorr/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace spikedcorr {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& x, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

} // namespace

std::array<std::uint32_t, 4> PhiloxStream::philox4x32(std::array<std::uint32_t, 4> counter,
                                                      std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    round_once(counter, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

PhiloxStream::PhiloxStream(std::uint64_t master_seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(master_seed),
           static_cast<std::uint32_t>(master_seed >> 32)},
      stream_(stream) {}

void PhiloxStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 4> out = philox4x32(ctr, key_);
  buf_[0] = static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
  buf_[1] = static_cast<std::uint64_t>(out[2]) | (static_cast<std::uint64_t>(out[3]) << 32);
  buf_pos_ = 0;
  ++block_;
}

std::uint64_t PhiloxStream::next_u64() {
  if (buf_pos_ >= 2) refill();
  return buf_[buf_pos_++];
}

double PhiloxStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double PhiloxStream::next_gaussian() {
  if (has_gauss_) {
    has_gauss_ = false;
    return gauss_cache_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_unit() - 1.0;
    v = 2.0 * next_unit() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  gauss_cache_ = v * f;
  has_gauss_ = true;
  return u * f;
}

double PhiloxStream::next_rademacher() {
  return (next_u64() & 1u) ? 1.0 : -1.0;
}

double PhiloxStream::next_uniform_sym() {
  return std::sqrt(3.0) * (2.0 * next_unit() - 1.0);
}

double PhiloxStream::next_two_point(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("two-point probability must lie in (0,1)");
  const double q = 1.0 - p;
  return next_unit() < p ? std::sqrt(q / p) : -std::sqrt(p / q);
}

double PhiloxStream::next_innovation(InnovationFamily family, double two_point_p) {
  switch (family) {
    case InnovationFamily::Gaussian: return next_gaussian();
    case InnovationFamily::Rademacher: return next_rademacher();
    case InnovationFamily::Uniform: return next_uniform_sym();
    case InnovationFamily::TwoPointAsymmetric: return next_two_point(two_point_p);
  }
  throw std::invalid_argument("unknown innovation family");
}

} // namespace spikedcorr
