#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace lkld {

/// Seeded generator with fully specified output: std::mt19937_64 (whose
/// sequence is fixed by the C++ standard) plus explicit conversions, so the
/// same seed yields the same draws on every conforming toolchain.
///
///   uniform01()   = (next() >> 11) * 2^-53            in [0, 1)
///   open01()      = ((next() >> 11) + 0.5) * 2^-53    in (0, 1)
///   uniform(a, b) = a + (b - a) * uniform01()
///   laplace(b)    = -b * sgn(u) * log1p(-2|u|),  u = open01() - 0.5
///   below(n)      = floor(uniform01() * n)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform01();
    double open01();
    double uniform(double lo, double hi);
    double laplace(double scale);
    std::size_t below(std::size_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace lkld
