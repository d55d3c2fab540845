#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrdetect {

// Error categories double as process exit codes.
enum class errc : int {
    config = 2,
    prerequisite = 3,
    data = 4,
};

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    errc code() const { return code_; }
    int exit_code() const { return static_cast<int>(code_); }

private:
    errc code_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(errc::config, msg); }
[[noreturn]] inline void throw_prereq(const std::string& msg) { throw Error(errc::prerequisite, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(errc::data, msg); }

// Deterministic PRNG with a pinned algorithm. std::shuffle and the standard
// distributions are implementation-defined in how they consume the engine,
// which breaks byte-identical reproducibility across toolchains; every
// seeded operation in the pipeline goes through this generator instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % bound;
    }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    int next_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    // Derive an independent stream, e.g. one per image.
    Rng fork(std::uint64_t salt) {
        Rng child(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x61c88646ULL));
        return child;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates, back to front.
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// FNV-1a 64-bit, used for run-manifest content hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace corrdetect
