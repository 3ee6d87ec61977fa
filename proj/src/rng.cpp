#include "cfx/rng.hpp"

#include <cmath>
#include <numbers>

namespace cfx {

// Box-Muller on a fresh pair of uniforms. The sine partner is discarded so
// each normal is a pure function of two consecutive counter values; that
// keeps draws independent of call history beyond the counter itself.
double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cfx
