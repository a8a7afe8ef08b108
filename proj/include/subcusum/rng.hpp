#pragma once

#include <cstdint>
#include <random>

namespace subcusum {

/// Deterministic per-task engine derived from (master seed, salt, index).
/// Every Monte Carlo replication owns one of these, so results do not
/// depend on scheduling or worker count.
inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t salt = 0,
                                   std::uint64_t index = 0) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
      static_cast<std::uint32_t>(salt),   static_cast<std::uint32_t>(salt >> 32),
      static_cast<std::uint32_t>(index),  static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace subcusum
