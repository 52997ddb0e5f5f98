#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace raterlab::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Independent stream seed for a tuple of keys under a base seed.
constexpr std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = splitmix64(base);
    for (auto k : keys) s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ull));
    return s;
}

}  // namespace raterlab::rng
