#pragma once

#include <cstdint>
#include <random>

namespace sgne {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamTag : std::uint64_t { gradient = 0, initial_state = 1, scenario = 2, test = 3 };

/// Counter-based key: distinct (seed, agent, iteration, tag) give independent streams.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t agent, std::uint64_t iteration,
                                StreamTag tag = StreamTag::gradient) {
  std::uint64_t s = seed;
  std::uint64_t key = splitmix64(s);
  s = key ^ (agent + 0x632be59bd9b4e019ULL);
  key = splitmix64(s);
  s = key ^ (iteration + 0x8cb92ba72f3d8dd7ULL);
  key = splitmix64(s);
  s = key ^ static_cast<std::uint64_t>(tag);
  return splitmix64(s);
}

inline Rng agent_stream(std::uint64_t seed, int agent, long iteration,
                        StreamTag tag = StreamTag::gradient) {
  return Rng(stream_key(seed, static_cast<std::uint64_t>(agent),
                        static_cast<std::uint64_t>(iteration), tag));
}

}  // namespace sgne
