#include "tdoa/manifold.hpp"
#include "tdoa/scene.hpp"

#include <gtest/gtest.h>

#include <array>
#include <map>
#include <sstream>

using namespace tdoa;
using namespace tdoa::manifold;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double d : v) x[k++] = d;
  return x;
}

const std::vector<Vector>& room_data() {
  static const std::vector<Vector> data = scene::generate_training_set(
      scene::default_array(), scene::default_training_region(), 20000, 16000.0, 21);
  return data;
}

const PdTree& room_tree() {
  static const PdTree tree = PdTree::build(room_data(), {}, 1);
  return tree;
}

std::vector<Vector> random_queries(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 40.0);
  std::vector<Vector> out;
  for (int q = 0; q < n; ++q) {
    Vector x(21);
    for (auto& v : x) v = g(rng);
    out.push_back(x);
  }
  return out;
}

// Leaf index of every training point, recomputed by replaying the splits.
std::map<int, int> leaf_sizes(const PdTree& tree, std::span<const Vector> data) {
  std::map<int, int> sizes;
  for (const auto& x : data) ++sizes[tree.route(x).back()];
  return sizes;
}

}  // namespace

TEST(Tree, CollinearPoints) {
  const std::vector<Vector> pts{vec({0, 0}), vec({1, 0}), vec({2, 0}), vec({3, 0})};
  TreeConfig cfg;
  cfg.depth = 1;
  cfg.k = 1;
  const auto tree = PdTree::build(pts, cfg, 0);
  const auto& root = tree.root();
  ASSERT_FALSE(root.is_leaf());
  EXPECT_NEAR(std::abs(root.split_dir[0]), 1.0, 1e-12);
  EXPECT_NEAR(root.split_dir[1], 0.0, 1e-12);
  const double sign = root.split_dir[0];
  EXPECT_NEAR(root.split_threshold, 1.5 * sign, 1e-12);
  const auto& left = tree.node(root.left);
  const auto& right = tree.node(root.right);
  // The side holding the small-x points depends only on the sign of the direction.
  const auto& low = sign > 0 ? left : right;
  const auto& high = sign > 0 ? right : left;
  EXPECT_TRUE(low.mean.isApprox(vec({0.5, 0})));
  EXPECT_TRUE(high.mean.isApprox(vec({2.5, 0})));
  EXPECT_EQ(left.count, 2);
  EXPECT_EQ(right.count, 2);
}

TEST(Tree, FirstNonzeroComponentIsPositive) {
  for (const auto& n : room_tree().nodes()) {
    for (Eigen::Index c = 0; c < n.principal_dirs.cols(); ++c) {
      const auto col = n.principal_dirs.col(c);
      Eigen::Index first = 0;
      while (first < col.size() && std::abs(col[first]) < 1e-12) ++first;
      ASSERT_LT(first, col.size());
      EXPECT_GT(col[first], 0.0);
    }
  }
}

TEST(Tree, DepthZeroIsGlobalPca) {
  TreeConfig cfg;
  cfg.depth = 0;
  const auto tree = PdTree::build(room_data(), cfg, 0);
  ASSERT_EQ(tree.nodes().size(), 1u);
  EXPECT_TRUE(tree.root().is_leaf());
  Vector mean = Vector::Zero(21);
  for (const auto& x : room_data()) mean += x;
  mean /= double(room_data().size());
  EXPECT_TRUE(tree.root().mean.isApprox(mean, 1e-12));
  const Eigen::MatrixXd gram = tree.root().principal_dirs.transpose() * tree.root().principal_dirs;
  EXPECT_TRUE(gram.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
}

TEST(Tree, RoomTreeIsBalanced) {
  const auto& tree = room_tree();
  const auto leaves = tree.leaves();
  ASSERT_EQ(leaves.size(), 4u);
  for (int l : leaves) {
    EXPECT_GE(tree.node(l).count, 4999);
    EXPECT_LE(tree.node(l).count, 5001);
  }
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) continue;
    EXPECT_LE(std::abs(tree.node(n.left).count - tree.node(n.right).count), 1);
    EXPECT_EQ(tree.node(n.left).count + tree.node(n.right).count, n.count);
  }
}

TEST(Tree, RoutingReproducesPartition) {
  const auto& tree = room_tree();
  const auto sizes = leaf_sizes(tree, room_data());
  for (int l : tree.leaves()) EXPECT_EQ(sizes.at(l), tree.node(l).count);
  const auto path = tree.route(room_data()[0]);
  ASSERT_EQ(path.size(), 3u);
  EXPECT_EQ(path.front(), 0);
  for (std::size_t k = 1; k < path.size(); ++k) EXPECT_EQ(tree.node(path[k]).depth, int(k));
}

TEST(Tree, RoutingFollowsTheSplitRule) {
  const auto& tree = room_tree();
  for (const auto& x : random_queries(200, 30)) {
    const auto path = tree.route(x);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const auto& n = tree.node(path[k]);
      EXPECT_EQ(path[k + 1], x.dot(n.split_dir) <= n.split_threshold ? n.left : n.right);
    }
    EXPECT_TRUE(tree.node(path.back()).is_leaf());
  }
  // A query exactly on the collinear threshold goes left.
  const std::vector<Vector> pts{vec({0, 0}), vec({1, 0}), vec({2, 0}), vec({3, 0})};
  TreeConfig cfg;
  cfg.depth = 1;
  cfg.k = 1;
  const auto line = PdTree::build(pts, cfg, 0);
  Vector on = line.root().split_dir * line.root().split_threshold;
  if (on.dot(line.root().split_dir) == line.root().split_threshold) {
    EXPECT_EQ(line.route(on)[1], line.root().left);
  }
  EXPECT_EQ(line.route(pts[0])[1], line.route(pts[1])[1]);
  EXPECT_NE(line.route(pts[1])[1], line.route(pts[2])[1]);
}

TEST(Tree, SplitDirectionBeatsEveryAxis) {
  const auto& tree = room_tree();
  const auto& data = room_data();
  std::vector<std::vector<Vector>> members(tree.nodes().size());
  for (const auto& x : data) {
    for (int n : tree.route(x)) members[std::size_t(n)].push_back(x);
  }
  for (std::size_t n = 0; n < members.size(); ++n) {
    const auto& node = tree.node(int(n));
    if (node.is_leaf()) continue;
    const auto& pts = members[n];
    double split_var = 0.0;
    Vector axis_var = Vector::Zero(21);
    for (const auto& x : pts) {
      const Vector c = x - node.mean;
      split_var += c.dot(node.split_dir) * c.dot(node.split_dir);
      axis_var += c.cwiseProduct(c);
    }
    EXPECT_GE(split_var, axis_var.maxCoeff() * (1 - 1e-12));
  }
}

TEST(Tree, TooFewPointsIsAnError) {
  const std::vector<Vector> pts{vec({0, 0}), vec({1, 0})};
  TreeConfig cfg;
  cfg.k = 2;
  EXPECT_THROW(PdTree::build(pts, cfg, 0), std::invalid_argument);
}

TEST(Tree, ConstantDataIsDegenerateLeaf) {
  std::vector<Vector> pts(20, vec({1, 2, 3}));
  TreeConfig cfg;
  cfg.k = 1;
  const auto tree = PdTree::build(pts, cfg, 0);
  ASSERT_EQ(tree.nodes().size(), 1u);
  EXPECT_TRUE(tree.root().degenerate);
  EXPECT_EQ(project(tree.root(), vec({7, 7, 7})), vec({1, 2, 3}));
}

TEST(Tree, RandomProjectionRuleIsSeedDeterministic) {
  TreeConfig cfg;
  cfg.split_rule = SplitRule::rp;
  const std::span<const Vector> data(room_data().data(), 4000);
  const auto a = PdTree::build(data, cfg, 5);
  const auto b = PdTree::build(data, cfg, 5);
  const auto c = PdTree::build(data, cfg, 6);
  EXPECT_EQ(a.root().split_dir, b.root().split_dir);
  EXPECT_NE(a.root().split_dir, c.root().split_dir);
  EXPECT_NEAR(a.root().split_dir.norm(), 1.0, 1e-12);
  for (const auto& n : a.nodes()) {
    if (!n.is_leaf()) EXPECT_LE(std::abs(a.node(n.left).count - a.node(n.right).count), 1);
  }
}

TEST(Tree, TextRoundTripIsExact) {
  std::stringstream ss;
  room_tree().write(ss);
  const auto back = PdTree::read(ss);
  std::stringstream again;
  back.write(again);
  std::stringstream first;
  room_tree().write(first);
  EXPECT_EQ(first.str(), again.str());
  ASSERT_EQ(back.nodes().size(), room_tree().nodes().size());
  for (std::size_t n = 0; n < back.nodes().size(); ++n) {
    const auto& a = room_tree().nodes()[n];
    const auto& b = back.nodes()[n];
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.principal_dirs, b.principal_dirs);
    EXPECT_EQ(a.split_dir, b.split_dir);
    EXPECT_EQ(a.split_threshold, b.split_threshold);
  }
}

TEST(Tree, ReadRejectsGarbage) {
  std::stringstream ss("hello world");
  EXPECT_THROW(PdTree::read(ss), std::runtime_error);
}

TEST(Project, SpanVectorsAreFixed) {
  const auto& node = room_tree().root();
  const Vector in_span = node.mean + node.principal_dirs * vec({3.0, -2.0, 0.5});
  EXPECT_LT((project(node, in_span) - in_span).norm(), 1e-9);
}

TEST(Project, DropsOrthogonalPart) {
  const auto& node = room_tree().root();
  const Vector v = node.principal_dirs * vec({1.0, 4.0, -2.0});
  Vector w = random_queries(1, 31)[0];
  w -= node.principal_dirs * (node.principal_dirs.transpose() * w);
  EXPECT_LT((project(node, node.mean + v + w) - (node.mean + v)).norm(), 1e-9);
}

TEST(Project, FullRankIsIdentity) {
  std::vector<Vector> pts;
  Rng rng(32);
  std::normal_distribution<double> g;
  for (int k = 0; k < 50; ++k) pts.push_back(vec({g(rng), g(rng), g(rng)}));
  TreeConfig cfg;
  cfg.depth = 0;
  cfg.k = 3;
  const auto tree = PdTree::build(pts, cfg, 0);
  const Vector x = vec({5, -1, 2});
  EXPECT_LT((project(tree.root(), x) - x).norm(), 1e-9);
}

TEST(Project, IdempotentAndNonExpansive) {
  const auto qs = random_queries(1000, 33);
  for (const auto& node : room_tree().nodes()) {
    for (std::size_t q = 0; q + 1 < qs.size(); q += 2) {
      const Vector px = project(node, qs[q]);
      const Vector py = project(node, qs[q + 1]);
      EXPECT_LT((project(node, px) - px).norm(), 1e-9);
      EXPECT_LE((px - py).norm(), (qs[q] - qs[q + 1]).norm() + 1e-9);
    }
  }
}

TEST(Denoise, NoneLeavesInputAlone) {
  Rng rng(1);
  const Vector x = random_queries(1, 34)[0];
  const auto d = denoise(room_tree(), x, ProjectionStrategy::none(), rng);
  EXPECT_EQ(d.x, x);
  EXPECT_EQ(d.depth, -1);
}

TEST(Denoise, FixedDepthUsesTheAncestor) {
  Rng rng(1);
  const Vector x = room_data()[17] + random_queries(1, 35)[0] * 0.05;
  const auto path = room_tree().route(x);
  for (int depth = 0; depth <= 2; ++depth) {
    const auto d = denoise(room_tree(), x, ProjectionStrategy::fixed(depth), rng);
    EXPECT_EQ(d.depth, depth);
    EXPECT_EQ(d.x, project(room_tree().node(path[std::size_t(depth)]), x));
  }
  EXPECT_THROW(denoise(room_tree(), x, ProjectionStrategy::fixed(3), rng), std::invalid_argument);
}

TEST(Denoise, RandomizedDepthIsUniform) {
  Rng rng(36);
  const Vector x = room_data()[5];
  std::array<int, 3> counts{};
  const int n = 30000;
  for (int k = 0; k < n; ++k) ++counts[std::size_t(denoise(room_tree(), x, ProjectionStrategy::randomized(), rng).depth)];
  for (int c : counts) EXPECT_NEAR(double(c) / n, 1.0 / 3.0, 0.02);
}

TEST(Denoise, ShrinksNoiseOnTheManifold) {
  const auto test = scene::generate_training_set(scene::default_array(), scene::default_training_region(), 500,
                                                 16000.0, 37);
  Rng rng(38);
  std::normal_distribution<double> g(0.0, 5.0);
  double before = 0.0, after = 0.0;
  for (const auto& x : test) {
    Vector noisy = x;
    for (auto& v : noisy) v += g(rng);
    const auto d = denoise(room_tree(), noisy, ProjectionStrategy::fixed(2), rng);
    before += (noisy - x).squaredNorm();
    after += (d.x - x).squaredNorm();
  }
  EXPECT_LT(after, 0.7 * before);
}

TEST(Strategy, NamesRoundTrip) {
  for (const std::string s : {"none", "root", "1", "2", "rand"}) {
    EXPECT_EQ(ProjectionStrategy::parse(s).name(), s);
  }
  EXPECT_EQ(ProjectionStrategy::parse("root"), ProjectionStrategy::fixed(0));
  EXPECT_THROW(ProjectionStrategy::parse("deep"), std::invalid_argument);
  EXPECT_EQ(parse_split_rule("rp"), SplitRule::rp);
  EXPECT_THROW(parse_split_rule("kd"), std::invalid_argument);
}
