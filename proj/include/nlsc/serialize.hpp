#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

namespace nlsc {

/// Bit-exact double round trip through a hex string.
inline std::string double_to_hex(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
    return std::string(buf);
}

inline double double_from_hex(const std::string& s) {
    if (s.size() != 16) throw std::invalid_argument("double_from_hex: expected 16 hex chars");
    std::uint64_t bits = std::strtoull(s.c_str(), nullptr, 16);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

/// Shortest round-trip decimal for CSV output.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

/// FNV-1a over a byte string, used for config content hashes.
inline std::uint64_t fnv1a(const std::string& data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// 32-hex-digit content hash (two FNV-1a streams with distinct offsets).
inline std::string content_hash(const std::string& data) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                  static_cast<unsigned long long>(fnv1a(data)),
                  static_cast<unsigned long long>(fnv1a(data, 0x84222325cbf29ce4ULL)));
    return std::string(buf);
}

}  // namespace nlsc
