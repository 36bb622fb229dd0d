#pragma once

#include <cstdint>

namespace ekdaa {

// Counter-based SplitMix64 stream. Used everywhere randomness is needed so
// that runs are reproducible bit-for-bit across platforms; std::shuffle and
// std:: distributions are implementation-defined and must not be used for
// anything that affects results.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Uniform integer in [0, n); n > 0. Modulo bias is negligible for the
    // index ranges used here (n << 2^64).
    std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

  private:
    std::uint64_t state_;
};

// Mixes independent stream labels (seed, epoch, sample, ...) into one seed,
// so per-sample streams are stateless functions of their coordinates.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    Rng r(a * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL);
    std::uint64_t h = r.next_u64() ^ (b + 0x452821e638d01377ULL);
    Rng r2(h);
    return r2.next_u64() ^ (c * 0xd1342543de82ef95ULL + 1);
}

}  // namespace ekdaa
