#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace nsnmf {

/**
 * Portable seeded generator used for every random decision in the library.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Distributions are implemented here rather than taken from
 * <random> because the standard distributions are implementation defined:
 *
 *  - uniform():     (x >> 11) * 2^-53, a double in [0, 1)
 *  - below(n):      rejection sampling, reject x < (2^64 - n) mod n, return x mod n
 *  - shuffle(span): Fisher-Yates, for i = n-1 down to 1 swap(a[i], a[below(i + 1)])
 *
 * Any implementation that follows these three rules reproduces our splits,
 * folds and initializations bit for bit.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; used for factor initialization so no entry starts at exactly 0.
    double uniform_open_zero() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = engine_();
            if (x >= threshold) return x % n;
        }
    }

    template <class T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nsnmf
