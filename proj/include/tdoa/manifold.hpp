#pragma once

// Principal-direction trees (and the random-projection variant) over
// training delay vectors, with per-node local PCA used to project noisy
// states back onto a piecewise-affine model of the delay manifold.

#include "tdoa/pairs.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tdoa::manifold {

using Vector = Eigen::VectorXd;

enum class SplitRule { pd, rp };

std::string to_string(SplitRule rule);
SplitRule parse_split_rule(const std::string& s);

struct TreeConfig {
  int depth = 2;
  int k = 3;
  SplitRule split_rule = SplitRule::pd;
  /// 0 means the default of 2k.
  int min_leaf = 0;

  int effective_min_leaf() const { return min_leaf > 0 ? min_leaf : 2 * k; }
  void validate(int dimension) const;
};

struct PdNode {
  Vector mean;
  /// Columns are the top-k principal directions, orthonormal.
  Eigen::MatrixXd principal_dirs;
  Vector split_dir;
  double split_threshold = 0.0;
  /// Indices into PdTree::nodes(), -1 for a leaf.
  int left = -1;
  int right = -1;
  int depth = 0;
  int count = 0;
  /// Zero-variance node: projection returns the mean.
  bool degenerate = false;

  bool is_leaf() const { return left < 0; }
};

/// Immutable once built; nodes are stored breadth-first with the root at 0.
class PdTree {
 public:
  static PdTree build(std::span<const Vector> data, const TreeConfig& cfg, std::uint64_t rng_seed);

  const TreeConfig& config() const { return config_; }
  int dimension() const { return dimension_; }
  /// Configured depth; individual branches may stop earlier.
  int depth() const { return config_.depth; }
  const std::vector<PdNode>& nodes() const { return nodes_; }
  const PdNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  const PdNode& root() const { return nodes_.front(); }
  std::vector<int> leaves() const;

  /// Node indices from the root to the leaf x falls in. At each internal
  /// node, x goes left iff <x, split_dir> <= split_threshold.
  std::vector<int> route(const Vector& x) const;

  /// Versioned text form, doubles at 17 significant digits.
  void write(std::ostream& out) const;
  static PdTree read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static PdTree load(const std::filesystem::path& path);

 private:
  TreeConfig config_;
  int dimension_ = 0;
  std::vector<PdNode> nodes_;
};

/// mean + sum_j <x - mean, u_j> u_j; the mean for a degenerate node.
Vector project(const PdNode& node, const Vector& x);

struct ProjectionStrategy {
  enum class Mode { none, fixed_depth, randomized };

  Mode mode = Mode::none;
  int depth = 0;  // fixed_depth only

  static ProjectionStrategy none() { return {}; }
  static ProjectionStrategy fixed(int d) { return {Mode::fixed_depth, d}; }
  static ProjectionStrategy randomized() { return {Mode::randomized, 0}; }

  bool projects() const { return mode != Mode::none; }
  /// "none", "root" (fixed 0), "1", "2", ..., "rand".
  std::string name() const;
  static ProjectionStrategy parse(const std::string& s);

  friend bool operator==(const ProjectionStrategy&, const ProjectionStrategy&) = default;
};

struct Denoised {
  Vector x;
  /// Depth of the projecting node, -1 when no projection happened.
  int depth = -1;
};

/// Projects x at a node on its root-to-leaf path chosen by the strategy.
/// fixed_depth(d) uses the depth-d ancestor (the leaf if the branch is
/// shallower); randomized picks a path node uniformly with `rng`.
Denoised denoise(const PdTree& tree, const Vector& x, const ProjectionStrategy& strategy, Rng& rng);

}  // namespace tdoa::manifold
