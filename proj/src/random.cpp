#include "lkld/random.hpp"

#include <cmath>

namespace lkld {

namespace {
constexpr double kTwoPowMinus53 = 0x1p-53;
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * kTwoPowMinus53; }

double Rng::open01() { return (static_cast<double>(next() >> 11) + 0.5) * kTwoPowMinus53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::laplace(double scale) {
    const double u = open01() - 0.5;
    const double s = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    return -scale * s * std::log1p(-2.0 * std::abs(u));
}

std::size_t Rng::below(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;
}

}  // namespace lkld
