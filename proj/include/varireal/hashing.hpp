#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace varireal {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

// Stable across platforms and runs; used wherever a reproducible seed is derived.
std::uint64_t stable_hash(std::initializer_list<std::string_view> parts);

// Backend seed for one generation attempt, truncated to 32 bits.
std::uint32_t derive_seed(std::string_view real_image_id, std::string_view prompt_id, int attempt);

std::string hex64(std::uint64_t v);

}  // namespace varireal
