#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace fkd {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// Streams are addressed by (seed, stream index): the seed forms the key and
// the stream index occupies the high counter words, so any path's random
// sequence is reproducible independent of thread scheduling or the order in
// which paths are simulated.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0u, 0u,
               static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    std::uint32_t next_u32() {
        if (idx_ == 4) {
            block_ = round10(ctr_, key_);
            advance_counter();
            idx_ = 0;
        }
        return block_[idx_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on (0,1), never exactly 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

private:
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;

    static void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        lo = static_cast<std::uint32_t>(p);
        hi = static_cast<std::uint32_t>(p >> 32);
    }

    static std::array<std::uint32_t, 4> round10(std::array<std::uint32_t, 4> c,
                                                std::array<std::uint32_t, 2> k) {
        for (int r = 0; r < 10; ++r) {
            std::uint32_t lo0, hi0, lo1, hi1;
            mul_hilo(kMulA, c[0], lo0, hi0);
            mul_hilo(kMulB, c[2], lo1, hi1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += kWeylA;
            k[1] += kWeylB;
        }
        return c;
    }

    void advance_counter() {
        if (++ctr_[0] == 0u) ++ctr_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> block_{};
    int idx_ = 4;
};

// Standard-normal draws on top of a Philox stream (Box-Muller, one cached).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed, stream) {}

    double next() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = gen_.next_uniform();
        double u2 = gen_.next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double next_uniform() { return gen_.next_uniform(); }

private:
    Philox gen_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace fkd
