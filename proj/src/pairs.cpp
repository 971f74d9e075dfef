#include "tdoa/pairs.hpp"

#include <stdexcept>
#include <string>

namespace tdoa {

int pair_count(int n_mics) { return n_mics * (n_mics - 1) / 2; }

std::vector<MicPair> canonical_pairs(int n_mics) {
  std::vector<MicPair> pairs;
  pairs.reserve(static_cast<std::size_t>(pair_count(n_mics)));
  for (int i = 0; i < n_mics; ++i) {
    for (int j = i + 1; j < n_mics; ++j) pairs.push_back({i, j});
  }
  return pairs;
}

int pair_index(int i, int j, int n_mics) {
  if (i < 0 || j <= i || j >= n_mics) {
    throw std::invalid_argument("pair_index: need 0 <= i < j < n");
  }
  // Pairs before row i: sum_{r<i} (n-1-r).
  return i * (2 * n_mics - i - 1) / 2 + (j - i - 1);
}

int mics_for_dimension(int d) {
  for (int n = 2; pair_count(n) <= d; ++n) {
    if (pair_count(n) == d) return n;
  }
  throw std::invalid_argument("dimension " + std::to_string(d) +
                              " is not n(n-1)/2 for any microphone count");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace tdoa
