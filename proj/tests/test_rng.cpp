#include "spikedcorr/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

using namespace spikedcorr;

TEST_CASE("philox4x32-10 reference vectors") {
  // Test vectors from the Random123 distribution (kat_vectors).
  auto out = PhiloxStream::philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  out = PhiloxStream::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                 {0xffffffffu, 0xffffffffu});
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  out = PhiloxStream::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 {0xa4093822u, 0x299f31d0u});
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams are reproducible and disjoint") {
  PhiloxStream a(42, stream_id(7, kStreamData));
  PhiloxStream b(42, stream_id(7, kStreamData));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // Different replicate, tag, or seed gives a different sequence.
  PhiloxStream c(42, stream_id(8, kStreamData));
  PhiloxStream d(42, stream_id(7, kStreamKrylov));
  PhiloxStream e(43, stream_id(7, kStreamData));
  PhiloxStream ref(42, stream_id(7, kStreamData));
  int same_c = 0, same_d = 0, same_e = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t r = ref.next_u64();
    same_c += r == c.next_u64();
    same_d += r == d.next_u64();
    same_e += r == e.next_u64();
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
  CHECK(same_e == 0);

  // Interleaving draws does not change what either stream produces.
  PhiloxStream s1(9, stream_id(0, kStreamData));
  PhiloxStream s2(9, stream_id(1, kStreamData));
  std::vector<std::uint64_t> seq1, seq2;
  for (int i = 0; i < 10; ++i) {
    seq1.push_back(s1.next_u64());
    seq2.push_back(s2.next_u64());
  }
  PhiloxStream t1(9, stream_id(0, kStreamData));
  PhiloxStream t2(9, stream_id(1, kStreamData));
  for (int i = 0; i < 10; ++i) {
    CHECK(t1.next_u64() == seq1[static_cast<size_t>(i)]);
    CHECK(t2.next_u64() == seq2[static_cast<size_t>(i)]);
  }
}

TEST_CASE("unit doubles live in [0,1) with 53-bit resolution") {
  PhiloxStream s(123, 0);
  double mn = 1.0, mx = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = s.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
  }
  CHECK(mn < 1e-4);
  CHECK(mx > 1.0 - 1e-4);
}

TEST_CASE("innovation families have the right low moments") {
  const int n = 400000;
  const double se2 = 4.0 / std::sqrt(static_cast<double>(n));  // generous

  struct FamilyCase {
    InnovationFamily family;
    double tp;
    double kurt;
  };
  const FamilyCase cases[] = {
      {InnovationFamily::Gaussian, 0.5, 0.0},
      {InnovationFamily::Rademacher, 0.5, -2.0},
      {InnovationFamily::Uniform, 0.5, -1.2},
      {InnovationFamily::TwoPointAsymmetric, 0.2, 0.25},
  };
  std::uint64_t rep = 0;
  for (const auto& c : cases) {
    PhiloxStream s(20240817, stream_id(rep++, kStreamData));
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = s.next_innovation(c.family, c.tp);
      m1 += x;
      m2 += x * x;
      m4 += x * x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) < 2.0 * se2);
    CHECK(std::abs(m2 - 1.0) < 2.0 * se2);
    CHECK(std::abs(m4 - (3.0 + c.kurt)) < 12.0 * se2);
  }

  // Rademacher and two-point values are exactly the two support points.
  PhiloxStream s(5, 0);
  for (int i = 0; i < 100; ++i) {
    const double r = s.next_rademacher();
    CHECK((r == 1.0 || r == -1.0));
    const double t = s.next_two_point(0.2);
    CHECK((t == doctest::Approx(2.0) || t == doctest::Approx(-0.5)));
    const double u = s.next_uniform_sym();
    CHECK(std::abs(u) <= std::sqrt(3.0));
  }
  CHECK_THROWS_AS(s.next_two_point(0.0), std::invalid_argument);
  CHECK_THROWS_AS(s.next_two_point(1.0), std::invalid_argument);
}

TEST_CASE("gaussian variates pass a coarse distribution check") {
  PhiloxStream s(777, stream_id(3, kStreamData));
  const int n = 200000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  int inside1 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.next_gaussian();
    m1 += x;
    m2 += x * x;
    m3 += x * x * x;
    m4 += x * x * x * x;
    inside1 += std::abs(x) < 1.0;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(m1) < 5 * se);
  CHECK(std::abs(m2 - 1.0) < 8 * se);
  CHECK(std::abs(m3) < 16 * se);
  CHECK(std::abs(m4 - 3.0) < 40 * se);
  // P(|Z| < 1) = 0.682689...
  CHECK(std::abs(static_cast<double>(inside1) / n - 0.6826894921) < 5e-3);
}
