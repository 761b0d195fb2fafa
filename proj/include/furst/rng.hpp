#pragma once

#include <cstdint>

namespace furst {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stream domains. Each purpose draws from its own key space so, e.g., the
/// reference trials of ld_tail never share draws with the measured trials.
enum class StreamTag : std::uint64_t {
    Trial        = 1,
    Reference    = 2,
    Restart      = 3,
    Sampling     = 4,
    Construction = 5,
    LongRun      = 6,
};

/// Counter-based random stream. The key is derived from (seed, index, tag);
/// draw i is mix64(key + i * golden), so streams are independent of thread
/// scheduling and can be re-created anywhere.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index, StreamTag tag = StreamTag::Trial) noexcept
        : key_(derive(seed, index, static_cast<std::uint64_t>(tag))) {}

    std::uint64_t next_u64() noexcept {
        counter_ += 1;
        return mix64(key_ + counter_ * kGolden);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's multiply-shift; bias is < n / 2^64, irrelevant here.
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }
    /// Standard normal via Box-Muller.
    double normal() noexcept;

    std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t index,
                                          std::uint64_t tag) noexcept {
        std::uint64_t k = mix64(seed + kGolden);
        k               = mix64(k ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
        k               = mix64(k ^ (tag * 0xABC98388FB8FAC03ULL + 0x2545F4914F6CDD1DULL));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Derives a child seed for a sub-experiment so that sibling experiments do not collide.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    return mix64(mix64(seed) ^ mix64(salt + 0x632BE59BD9B4E019ULL));
}

}  // namespace furst
