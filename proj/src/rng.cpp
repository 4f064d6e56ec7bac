#include "hamlearn/rng.hpp"

#include <cmath>
#include <numbers>

namespace hamlearn {

double standard_normal(CounterRng& rng) {
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace hamlearn
