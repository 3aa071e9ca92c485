#include "watl/rng.hpp"

#include <limits>
#include <stdexcept>

namespace watl {

std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t master,
                             std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  for (std::uint64_t id : path) {
    std::uint64_t mixed = s ^ (0xa0761d6478bd642fULL * (id + 1));
    s = splitmix64_next(mixed);
  }
  return s;
}

double Rng::uniform01() {
  // 53 significant bits, exact in double
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  double u = uniform01();
  while (u == 0.0) u = uniform01();
  return u;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % range);
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace watl
