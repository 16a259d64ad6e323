#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sqzm {

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised on malformed, truncated, or unsupported files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic RNG wrapper. Draws are derived from raw splitmix64 output so
/// that streams do not depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {
        for (int i = 0; i < 4; ++i) next_u64();
    }

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Halton low-discrepancy point in [0,1), dimension selects the prime base.
double halton(uint64_t index, int dim);

/// Prime base used by Halton dimension `dim`.
int halton_prime(int dim);

/// Avalanche mix of (a, b); used to derive independent seeds and per-item
/// hash values from one master seed.
uint64_t mix64(uint64_t a, uint64_t b);

/// mix64 folded to a uniform double in [0, 1).
double mix64_unit(uint64_t a, uint64_t b);

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunk boundaries depend only on (n, workers), so any writer that
/// touches only its own range is deterministic for every worker count.
void parallel_for_chunks(int64_t n, int workers,
                         const std::function<void(int64_t, int64_t)>& fn);

/// Default worker count for parallel paths (hardware concurrency, >= 1).
int default_workers();

}  // namespace sqzm
