#pragma once

#include <cstdint>
#include <random>

namespace lcmopg {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, a, b); e.g. (seed, iteration, episode).
inline Rng derive_stream(std::uint64_t master, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c),
                    static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

}  // namespace lcmopg
