#pragma once

#include <cstdint>
#include <initializer_list>

namespace cdac {

// splitmix64 finalizer; used to derive independent stream seeds from a run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salt) {
    std::uint64_t s = mix_seed(base);
    for (auto v : salt) s = mix_seed(s ^ v);
    return s;
}

}  // namespace cdac
