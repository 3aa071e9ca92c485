#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace watl {

// splitmix64 step; used only to derive seeds.
std::uint64_t splitmix64_next(std::uint64_t& state);

// Derives a substream seed from a master seed and a path of stream ids.
// Each id is hashed into the state independently of how many draws other
// substreams have consumed, so parallel and sequential execution produce
// identical streams. Stream-id conventions used across the library:
//   simulation:  {rep, 0} query points, {rep, 1 + k} study k,
//                {rep, kCvStream} cross-validation
//   study rows:  {row, 0} latent draws, {row, 1} per-distribution samples
std::uint64_t substream_seed(std::uint64_t master,
                             std::initializer_list<std::uint64_t> path);

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the conversions below avoid std::*_distribution, whose sequences are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0,1) with 53-bit resolution
  double uniform01();

  // uniform on the open interval (0,1)
  double uniform_open();

  // uniform integer in [0, n); n must be positive
  std::size_t uniform_index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates shuffle; deterministic given the engine state.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

}  // namespace watl
