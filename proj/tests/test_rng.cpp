#include "hamlearn/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace hamlearn;

TEST_CASE("key 0 reproduces the reference SplitMix64 sequence") {
  CounterRng rng(0);
  CHECK(rng() == 0xE220A8397B1DCDAFULL);
  CHECK(rng() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng() == 0x06C45D188009454FULL);
  CHECK(rng.counter() == 3);
}

TEST_CASE("substreams are deterministic and distinct") {
  auto a = CounterRng::substream(42, 3);
  auto b = CounterRng::substream(42, 3);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 1000; ++i) keys.insert(CounterRng::substream(42, i).key());
  CHECK(keys.size() == 1000);
  CHECK(CounterRng::substream(1, 0).key() != CounterRng::substream(2, 0).key());
}

TEST_CASE("uniform draws cover [0, 1) with the right moments") {
  auto rng = CounterRng::substream(7, 0);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    sum += u;
    sq += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  // 6 sigma bounds on the sample mean and second moment.
  CHECK(std::abs(sum / n - 0.5) < 6.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sq / n - 1.0 / 3.0) < 6.0 * std::sqrt(4.0 / 45.0 / n));
  auto r = CounterRng::substream(7, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = uniform(r, -1.0, 1.0);
    CHECK(x >= -1.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("standard normal moments") {
  auto rng = CounterRng::substream(8, 0);
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  bool finite = true;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    finite = finite && std::isfinite(z);
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  CHECK(finite);
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 6.0 / std::sqrt(double(n)));
  CHECK(std::abs(m2 - 1.0) < 6.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 6.0 * std::sqrt(96.0 / n));
}

TEST_CASE("satisfies UniformRandomBitGenerator") {
  static_assert(std::uniform_random_bit_generator<CounterRng>);
  CounterRng rng(1);
  std::uniform_int_distribution<int> d(0, 9);
  for (int i = 0; i < 100; ++i) {
    const int v = d(rng);
    CHECK(v >= 0);
    CHECK(v <= 9);
  }
}
