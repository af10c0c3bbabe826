#pragma once

#include <cstdint>

namespace dtse {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent seed for a (stream, index) pair under a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return mix64(mix64(mix64(base) ^ stream) ^ index);
}

// stream tags
namespace seed_stream {
inline constexpr std::uint64_t noise = 0x6e6f697365ULL;
inline constexpr std::uint64_t train_mask = 0x747261696eULL;
inline constexpr std::uint64_t valid_mask = 0x76616c6964ULL;
inline constexpr std::uint64_t eval_mask = 0x6576616cULL;
inline constexpr std::uint64_t init = 0x696e6974ULL;
inline constexpr std::uint64_t shuffle = 0x7368756666ULL;
inline constexpr std::uint64_t profile = 0x70726f66ULL;
}  // namespace seed_stream

}  // namespace dtse
