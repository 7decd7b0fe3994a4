#pragma once

#include <cstdint>
#include <random>

namespace ngmix {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream id); used for per-subject chains so that
/// results do not depend on how subjects are scheduled across threads.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x6e676d69u};
  return Rng(seq);
}

}  // namespace ngmix
