#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace tdoa {

/// Full vector of pairwise delays, in samples, canonical pair order.
using TdoaVector = Eigen::VectorXd;

/// Seeded generator used everywhere randomness is needed. Always passed
/// explicitly; nothing in the library owns a global generator.
using Rng = std::mt19937_64;

/// Microphone pair (i, j) with i < j.
struct MicPair {
  int i = 0;
  int j = 0;

  friend bool operator==(const MicPair&, const MicPair&) = default;
};

/// Number of pairs for n microphones, n(n-1)/2.
int pair_count(int n_mics);

/// Pairs in lexicographic order: (0,1), (0,2), ..., (n-2,n-1).
std::vector<MicPair> canonical_pairs(int n_mics);

/// Index of pair (i, j), i < j, in canonical order.
int pair_index(int i, int j, int n_mics);

/// Inverse of pair_count; throws if d is not a triangular number.
int mics_for_dimension(int d);

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace tdoa
