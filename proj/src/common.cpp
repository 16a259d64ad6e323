#include "sqzm/common.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace sqzm {

namespace {

// First 128 primes, enough Halton dimensions for any rig we synthesize.
std::vector<int> make_primes(int count) {
    std::vector<int> primes;
    int candidate = 2;
    while (static_cast<int>(primes.size()) < count) {
        bool is_prime = true;
        for (int p : primes) {
            if (p * p > candidate) break;
            if (candidate % p == 0) {
                is_prime = false;
                break;
            }
        }
        if (is_prime) primes.push_back(candidate);
        ++candidate;
    }
    return primes;
}

const std::vector<int>& primes() {
    static const std::vector<int> table = make_primes(512);
    return table;
}

}  // namespace

int halton_prime(int dim) {
    const auto& table = primes();
    return table[static_cast<size_t>(dim) % table.size()];
}

double halton(uint64_t index, int dim) {
    const int base = halton_prime(dim);
    double f = 1.0;
    double r = 0.0;
    uint64_t i = index + 1;  // skip the all-zeros point
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double mix64_unit(uint64_t a, uint64_t b) {
    return static_cast<double>(mix64(a, b) >> 11) * 0x1.0p-53;
}

void parallel_for_chunks(int64_t n, int workers,
                         const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    workers = std::max(1, workers);
    const int64_t chunks = std::min<int64_t>(workers, n);
    if (chunks == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(chunks));
    for (int64_t c = 0; c < chunks; ++c) {
        const int64_t begin = n * c / chunks;
        const int64_t end = n * (c + 1) / chunks;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

int default_workers() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace sqzm
