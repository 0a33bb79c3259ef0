#pragma once

// Little-endian primitive encoding shared by the embedding, token and
// checkpoint formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace cdac::io {

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(buf.data(), buf.size());
}

template <typename U>
bool get_le(std::istream& in, U& value) {
    std::array<unsigned char, sizeof(U)> buf{};
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) return false;
    value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(buf[i]) << (8 * i);
    }
    return true;
}

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline bool get_u8(std::istream& in, std::uint8_t& v) {
    char c;
    if (!in.get(c)) return false;
    v = static_cast<std::uint8_t>(c);
    return true;
}
inline bool get_u32(std::istream& in, std::uint32_t& v) { return get_le(in, v); }
inline bool get_f32(std::istream& in, float& v) {
    std::uint32_t bits;
    if (!get_le(in, bits)) return false;
    v = std::bit_cast<float>(bits);
    return true;
}
inline bool get_f64(std::istream& in, double& v) {
    std::uint64_t bits;
    if (!get_le(in, bits)) return false;
    v = std::bit_cast<double>(bits);
    return true;
}

inline bool get_magic(std::istream& in, std::string& magic) {
    magic.assign(4, '\0');
    return static_cast<bool>(in.read(magic.data(), 4));
}

}  // namespace cdac::io
