#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lateralsim {

// 64-bit FNV-1a. Used for fingerprints and manifest hashes, not security.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);

// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

}  // namespace lateralsim
