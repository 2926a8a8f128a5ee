#pragma once

#include <cstdint>
#include <random>

namespace rarsim {

using Rng = std::mt19937_64;

/// SplitMix64 step, used only to mix seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed split: every (master, counter) pair maps to an
/// independent stream, so replicate r draws the same numbers no matter how
/// replicates are distributed over worker threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  std::uint64_t b = splitmix64(s);
  std::uint64_t c = splitmix64(s);
  return b ^ (c >> 1);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t counter) {
  return Rng(derive_seed(master, counter));
}

}  // namespace rarsim
