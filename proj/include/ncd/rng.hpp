#pragma once

#include <cstdint>
#include <vector>

namespace ncd {

// Counter-based generator: every draw is a hash of (seed, stream, counter),
// so per-sample child streams can be derived statelessly and replayed from
// any point. Identical (seed, stream) always reproduces identical draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Independent stream keyed by (this stream, index).
    Rng child(std::uint64_t index) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller; second draw of each pair is cached.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ncd
