#include "tdoa/manifold.hpp"

#include "tdoa/csv.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tdoa::manifold {

namespace {

constexpr const char* kTreeMagic = "tdoa-pdtree";
constexpr int kTreeVersion = 1;

// Flip so the first component that is not (numerically) zero is positive.
void canonical_sign(Eigen::Ref<Vector> v) {
  const double tol = 1e-12 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > tol) {
      if (v[k] < 0.0) v = -v;
      return;
    }
  }
}

struct LocalPca {
  Vector mean;
  Eigen::MatrixXd dirs;  // D x k, descending variance
  bool degenerate = false;
};

LocalPca local_pca(std::span<const Vector> data, const std::vector<int>& members, int k) {
  const Eigen::Index d = data.front().size();
  LocalPca out;
  out.mean = Vector::Zero(d);
  for (int idx : members) out.mean += data[static_cast<std::size_t>(idx)];
  out.mean /= static_cast<double>(members.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (int idx : members) {
    const Vector c = data[static_cast<std::size_t>(idx)] - out.mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(members.size());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("PCA eigendecomposition failed");
  const Eigen::MatrixXd& vecs = eig.eigenvectors();  // ascending eigenvalues
  out.dirs.resize(d, k);
  for (int j = 0; j < k; ++j) {
    out.dirs.col(j) = vecs.col(d - 1 - j);
    canonical_sign(out.dirs.col(j));
  }
  const double top = eig.eigenvalues()[d - 1];
  out.degenerate = !(top > 1e-20 * std::max(1.0, out.mean.squaredNorm()));
  return out;
}

void write_vector(std::ostream& out, const char* tag, const Vector& v) {
  out << tag;
  for (Eigen::Index k = 0; k < v.size(); ++k) out << ' ' << csv::format(v[k]);
  out << '\n';
}

Vector read_vector(std::istream& in, const char* tag, int d) {
  std::string t;
  in >> t;
  if (t != tag) throw std::runtime_error(std::string("tree file: expected '") + tag + "', got '" + t + "'");
  Vector v(d);
  for (int k = 0; k < d; ++k) {
    std::string s;
    in >> s;
    v[k] = csv::to_double(s);
  }
  return v;
}

}  // namespace

std::string to_string(SplitRule rule) { return rule == SplitRule::pd ? "pd" : "rp"; }

SplitRule parse_split_rule(const std::string& s) {
  if (s == "pd") return SplitRule::pd;
  if (s == "rp") return SplitRule::rp;
  throw std::invalid_argument("unknown split rule '" + s + "' (expected pd or rp)");
}

void TreeConfig::validate(int dimension) const {
  if (depth < 0) throw std::invalid_argument("tree depth must be >= 0");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > dimension) throw std::invalid_argument("k must not exceed the data dimension");
  if (min_leaf < 0) throw std::invalid_argument("min_leaf must be >= 0");
}

PdTree PdTree::build(std::span<const Vector> data, const TreeConfig& cfg, std::uint64_t rng_seed) {
  if (data.empty()) throw std::invalid_argument("build_tree: no training data");
  const int d = static_cast<int>(data.front().size());
  cfg.validate(d);
  for (const auto& x : data) {
    if (x.size() != d) throw std::invalid_argument("build_tree: vectors differ in dimension");
  }
  const int min_leaf = cfg.effective_min_leaf();
  if (static_cast<int>(data.size()) < min_leaf) {
    throw std::invalid_argument("build_tree: fewer training points than min_leaf");
  }

  PdTree tree;
  tree.config_ = cfg;
  tree.dimension_ = d;
  Rng rng(rng_seed);

  struct Pending {
    int node;
    std::vector<int> members;
  };
  std::deque<Pending> queue;
  {
    std::vector<int> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    tree.nodes_.emplace_back();
    queue.push_back({0, std::move(all)});
  }

  while (!queue.empty()) {
    Pending job = std::move(queue.front());
    queue.pop_front();
    const LocalPca pca = local_pca(data, job.members, cfg.k);
    {
      PdNode& node = tree.nodes_[static_cast<std::size_t>(job.node)];
      node.mean = pca.mean;
      node.principal_dirs = pca.dirs;
      node.count = static_cast<int>(job.members.size());
      node.degenerate = pca.degenerate;
      node.split_dir = pca.dirs.col(0);
    }
    const PdNode& node = tree.nodes_[static_cast<std::size_t>(job.node)];
    if (node.depth >= cfg.depth || node.degenerate || node.count < 2 * min_leaf) continue;

    Vector dir;
    if (cfg.split_rule == SplitRule::pd) {
      dir = pca.dirs.col(0);
    } else {
      std::normal_distribution<double> g(0.0, 1.0);
      dir.resize(d);
      for (int k = 0; k < d; ++k) dir[k] = g(rng);
      dir.normalize();
    }

    std::vector<double> proj;
    proj.reserve(job.members.size());
    for (int idx : job.members) proj.push_back(dir.dot(data[static_cast<std::size_t>(idx)]));
    std::vector<double> sorted = proj;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = (sorted.size() + 1) / 2;
    const double lo = sorted[h - 1];
    const double hi = sorted[h];
    if (!(lo < hi)) continue;  // median tie across the split: keep as leaf
    double threshold = lo + 0.5 * (hi - lo);
    if (threshold >= hi) threshold = lo;

    Pending left{static_cast<int>(tree.nodes_.size()), {}};
    Pending right{left.node + 1, {}};
    for (std::size_t m = 0; m < job.members.size(); ++m) {
      (proj[m] <= threshold ? left.members : right.members).push_back(job.members[m]);
    }

    const int depth = node.depth;
    PdNode& parent = tree.nodes_[static_cast<std::size_t>(job.node)];
    parent.split_dir = dir;
    parent.split_threshold = threshold;
    parent.left = left.node;
    parent.right = right.node;
    tree.nodes_.emplace_back().depth = depth + 1;
    tree.nodes_.emplace_back().depth = depth + 1;
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  return tree;
}

std::vector<int> PdTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> PdTree::route(const Vector& x) const {
  if (x.size() != dimension_) throw std::invalid_argument("route: dimension mismatch");
  std::vector<int> path{0};
  int cur = 0;
  while (!nodes_[static_cast<std::size_t>(cur)].is_leaf()) {
    const PdNode& n = nodes_[static_cast<std::size_t>(cur)];
    cur = x.dot(n.split_dir) <= n.split_threshold ? n.left : n.right;
    path.push_back(cur);
  }
  return path;
}

void PdTree::write(std::ostream& out) const {
  out << kTreeMagic << ' ' << kTreeVersion << '\n';
  out << "config " << config_.depth << ' ' << config_.k << ' ' << to_string(config_.split_rule) << ' '
      << config_.min_leaf << '\n';
  out << "dimension " << dimension_ << '\n';
  out << "nodes " << nodes_.size() << '\n';
  for (const PdNode& n : nodes_) {
    out << "node " << n.depth << ' ' << n.count << ' ' << (n.degenerate ? 1 : 0) << ' ' << n.left << ' '
        << n.right << ' ' << csv::format(n.split_threshold) << '\n';
    write_vector(out, "mean", n.mean);
    write_vector(out, "split", n.split_dir);
    for (Eigen::Index j = 0; j < n.principal_dirs.cols(); ++j) write_vector(out, "dir", n.principal_dirs.col(j));
  }
}

PdTree PdTree::read(std::istream& in) {
  std::string magic, tag, rule;
  int version = 0;
  in >> magic >> version;
  if (magic != kTreeMagic) throw std::runtime_error("not a tree file");
  if (version != kTreeVersion) throw std::runtime_error("unsupported tree file version " + std::to_string(version));

  PdTree tree;
  in >> tag >> tree.config_.depth >> tree.config_.k >> rule >> tree.config_.min_leaf;
  if (tag != "config") throw std::runtime_error("tree file: expected config line");
  tree.config_.split_rule = parse_split_rule(rule);
  in >> tag >> tree.dimension_;
  if (tag != "dimension") throw std::runtime_error("tree file: expected dimension line");
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != "nodes" || !in) throw std::runtime_error("tree file: expected nodes line");
  tree.config_.validate(tree.dimension_);

  const int d = tree.dimension_;
  tree.nodes_.resize(count);
  for (PdNode& n : tree.nodes_) {
    int degenerate = 0;
    std::string thr;
    in >> tag >> n.depth >> n.count >> degenerate >> n.left >> n.right >> thr;
    if (tag != "node" || !in) throw std::runtime_error("tree file: malformed node header");
    n.degenerate = degenerate != 0;
    n.split_threshold = csv::to_double(thr);
    n.mean = read_vector(in, "mean", d);
    n.split_dir = read_vector(in, "split", d);
    n.principal_dirs.resize(d, tree.config_.k);
    for (int j = 0; j < tree.config_.k; ++j) n.principal_dirs.col(j) = read_vector(in, "dir", d);
  }
  if (!in) throw std::runtime_error("tree file: truncated");
  for (const PdNode& n : tree.nodes_) {
    const auto bad = [&](int c) { return c != -1 && (c <= 0 || c >= static_cast<int>(count)); };
    if (bad(n.left) || bad(n.right) || ((n.left < 0) != (n.right < 0))) {
      throw std::runtime_error("tree file: bad child index");
    }
  }
  return tree;
}

void PdTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PdTree PdTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file " + path.string());
  return read(in);
}

Vector project(const PdNode& node, const Vector& x) {
  if (x.size() != node.mean.size()) throw std::invalid_argument("project: dimension mismatch");
  if (node.degenerate) return node.mean;
  const Vector coeffs = node.principal_dirs.transpose() * (x - node.mean);
  return node.mean + node.principal_dirs * coeffs;
}

std::string ProjectionStrategy::name() const {
  switch (mode) {
    case Mode::none:
      return "none";
    case Mode::randomized:
      return "rand";
    case Mode::fixed_depth:
      return depth == 0 ? "root" : std::to_string(depth);
  }
  return "none";
}

ProjectionStrategy ProjectionStrategy::parse(const std::string& s) {
  if (s == "none") return none();
  if (s == "rand" || s == "randomized") return randomized();
  if (s == "root") return fixed(0);
  int d = 0;
  std::istringstream in(s);
  if (in >> d && in.eof() && d >= 0) return fixed(d);
  throw std::invalid_argument("unknown projection strategy '" + s + "'");
}

Denoised denoise(const PdTree& tree, const Vector& x, const ProjectionStrategy& strategy, Rng& rng) {
  using Mode = ProjectionStrategy::Mode;
  if (strategy.mode == Mode::none) return {x, -1};
  const std::vector<int> path = tree.route(x);
  std::size_t pick = 0;
  if (strategy.mode == Mode::fixed_depth) {
    if (strategy.depth < 0 || strategy.depth > tree.depth()) {
      throw std::invalid_argument("denoise: fixed depth exceeds tree depth");
    }
    pick = std::min(static_cast<std::size_t>(strategy.depth), path.size() - 1);
  } else {
    pick = std::uniform_int_distribution<std::size_t>(0, path.size() - 1)(rng);
  }
  const PdNode& node = tree.node(path[pick]);
  return {project(node, x), node.depth};
}

}  // namespace tdoa::manifold
