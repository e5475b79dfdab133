#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "etr/error.hpp"

// Little-endian primitives shared by the snapshot, embedding, token and
// checkpoint formats.
namespace etr::binio {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

inline void write_f32(std::ostream& os, float f) { write_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline void write_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw InputError("truncated " + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float read_f32(std::istream& is, const std::string& what) {
    return std::bit_cast<float>(read_u32(is, what));
}

inline void expect_magic(std::istream& is, std::string_view magic, const std::string& what) {
    std::string got(magic.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
        throw InputError(what + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace etr::binio
