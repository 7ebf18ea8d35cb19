#pragma once

// Partition trees over row or column indices, tree-based transport distances,
// and the alternating row/column tree construction.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matcore.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace eows {

// A folder is a contiguous run of leaf_order. Level 0 is the root; the last
// level holds singletons. Leaves that stop splitting early are repeated as
// singleton folders on every deeper level.
struct Folder {
  Index offset = 0;
  Index size = 0;
  Index parent = -1;  // index into the previous level
  std::vector<Index> children;  // indices into the next level
};

struct PartitionTree {
  std::vector<std::vector<Folder>> levels;
  std::vector<Index> leaf_order;

  [[nodiscard]] Index leaves() const { return static_cast<Index>(leaf_order.size()); }
  [[nodiscard]] Index depth() const { return static_cast<Index>(levels.size()); }
  [[nodiscard]] const Folder& folder(Index level, Index id) const {
    return levels[static_cast<std::size_t>(level)][static_cast<std::size_t>(id)];
  }
  [[nodiscard]] std::span<const Index> members(Index level, Index id) const {
    const Folder& f = folder(level, id);
    return {leaf_order.data() + f.offset, static_cast<std::size_t>(f.size)};
  }

  // Throws InputError unless every level partitions the leaves into contiguous
  // runs, parents and children agree, and the last level is all singletons.
  void validate() const {
    const Index n = leaves();
    require(n >= 1 && !levels.empty(), "tree: empty");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (Index v : leaf_order) {
      require(v >= 0 && v < n && !seen[static_cast<std::size_t>(v)], "tree: leaf_order is not a permutation");
      seen[static_cast<std::size_t>(v)] = 1;
    }
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Index at = 0;
      require(!levels[l].empty(), "tree: empty level");
      for (std::size_t k = 0; k < levels[l].size(); ++k) {
        const Folder& f = levels[l][k];
        require(f.offset == at && f.size >= 1, "tree: level " + std::to_string(l) + " is not a contiguous partition");
        at += f.size;
        if (l == 0) {
          require(f.parent == -1, "tree: root has a parent");
        } else {
          require(f.parent >= 0 && f.parent < static_cast<Index>(levels[l - 1].size()), "tree: bad parent");
          const auto& pc = levels[l - 1][static_cast<std::size_t>(f.parent)].children;
          require(std::find(pc.begin(), pc.end(), static_cast<Index>(k)) != pc.end(), "tree: parent/child mismatch");
        }
        if (l + 1 < levels.size()) {
          require(!f.children.empty(), "tree: folder without children above the last level");
          Index covered = 0;
          Index expect = f.offset;
          for (Index c : f.children) {
            require(c >= 0 && c < static_cast<Index>(levels[l + 1].size()), "tree: bad child");
            const Folder& cf = levels[l + 1][static_cast<std::size_t>(c)];
            require(cf.offset == expect, "tree: children out of order");
            expect += cf.size;
            covered += cf.size;
          }
          require(covered == f.size, "tree: children do not cover their parent");
        } else {
          require(f.size == 1 && f.children.empty(), "tree: last level must be singletons");
        }
      }
      require(at == n, "tree: level " + std::to_string(l) + " does not cover all leaves");
    }
    require(levels[0].size() == 1, "tree: root level must be a single folder");
  }
};

// ---------------------------------------------------------------------------
// Affinities

inline double median_of(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline std::vector<double> upper_triangle(const Mat& d) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(d.rows() * (d.rows() - 1) / 2));
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = i + 1; j < d.cols(); ++j) out.push_back(d(i, j));
  return out;
}

inline Mat pairwise_distances(const Mat& points) {
  const Index n = points.rows();
  Mat d = Mat::Zero(n, n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = points;
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Index>(ii);
    for (Index j = i + 1; j < n; ++j) d(i, j) = (rows.row(i) - rows.row(j)).norm();
  });
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  return d;
}

// Gaussian kernel over the rows of `points`, bandwidth = median pairwise
// distance. When more than half the pairs coincide, the median of the
// nonzero distances is used instead.
inline Mat gaussian_affinity(const Mat& points) {
  require_finite(points, "gaussian_affinity");
  const Index n = points.rows();
  require(n >= 1, "gaussian_affinity: no points");
  if (n == 1) return Mat::Ones(1, 1);
  const Mat d = pairwise_distances(points);
  auto dist = upper_triangle(d);
  double sigma = median_of(dist);
  if (sigma <= 0.0) {
    std::vector<double> pos;
    for (double x : dist)
      if (x > 0.0) pos.push_back(x);
    if (pos.empty()) throw DegenerateInput("gaussian_affinity: all points coincide");
    sigma = median_of(std::move(pos));
  }
  return (-(d.array().square()) / (2.0 * sigma * sigma)).exp().matrix();
}

// ---------------------------------------------------------------------------
// Spectral bipartition

namespace detail {

// Second eigenvector of the normalized affinity, i.e. the Fiedler vector of
// I - D^-1/2 W D^-1/2, computed in the complement of the trivial vector.
inline Vec dense_fiedler(const Mat& m, const Vec& trivial) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw NumericError("fiedler: eigensolver failed");
  const Index n = m.rows();
  const Vec e1 = es.eigenvectors().col(n - 1);
  const Vec e2 = es.eigenvectors().col(n - 2);
  // If the top eigenvalue is repeated the solver may mix the trivial vector
  // into both; this combination is the member of their span orthogonal to it.
  Vec f = e2 * trivial.dot(e1) - e1 * trivial.dot(e2);
  if (f.norm() < 1e-12) f = e2;
  return f.normalized();
}

inline Vec lanczos_fiedler(const Mat& m, const Vec& trivial, Index steps) {
  const Index n = m.rows();
  steps = std::min(steps, n - 1);
  Mat q(n, steps + 1);
  Vec alpha = Vec::Zero(steps), beta = Vec::Zero(steps);
  Vec v(n);
  for (Index i = 0; i < n; ++i)
    v(i) = static_cast<double>(splitmix64(static_cast<std::uint64_t>(i) + 17) >> 11) * 0x1.0p-53 - 0.5;
  v -= trivial * trivial.dot(v);
  v.normalize();
  q.col(0) = v;
  Index used = steps;
  for (Index j = 0; j < steps; ++j) {
    Vec w = m * q.col(j);
    w -= trivial * trivial.dot(w);
    alpha(j) = q.col(j).dot(w);
    for (int pass = 0; pass < 2; ++pass) {
      w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
      w -= trivial * trivial.dot(w);
    }
    const double b = w.norm();
    if (j + 1 == steps || b < 1e-12) {
      used = j + 1;
      break;
    }
    beta(j) = b;
    q.col(j + 1) = w / b;
  }
  Mat t = Mat::Zero(used, used);
  for (Index j = 0; j < used; ++j) {
    t(j, j) = alpha(j);
    if (j + 1 < used) t(j, j + 1) = t(j + 1, j) = beta(j);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(t);
  if (es.info() != Eigen::Success) throw NumericError("fiedler: Lanczos eigensolver failed");
  Vec x = q.leftCols(used) * es.eigenvectors().col(used - 1);
  return x.normalized();
}

inline double ritz_residual(const Mat& m, const Vec& trivial, const Vec& x) {
  Vec y = m * x;
  y -= trivial * trivial.dot(y);
  const double theta = x.dot(y);
  return (y - theta * x).norm();
}

inline Vec fiedler_vector(const Mat& w) {
  const Index n = w.rows();
  const Vec deg = w.rowwise().sum();
  if ((deg.array() <= 0.0).any()) throw NumericError("fiedler: node with zero degree");
  const Vec inv_sqrt = deg.cwiseSqrt().cwiseInverse();
  const Mat m = inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();
  const Vec trivial = deg.cwiseSqrt().normalized();
  if (n <= 400) return dense_fiedler(m, trivial);
  for (Index steps : {Index{120}, Index{320}}) {
    Vec x = lanczos_fiedler(m, trivial, steps);
    if (ritz_residual(m, trivial, x) <= 1e-8) return x;
  }
  return dense_fiedler(m, trivial);
}

}  // namespace detail

struct Bipartition {
  std::vector<Index> left, right;  // local indices into the affinity
};

// Sign split of the Fiedler vector, oriented so its largest-magnitude entry
// is positive; entries within 1e-12 of zero go left. Empty sides fall back to
// a median split, and constant vectors to an index-parity split.
inline Bipartition fiedler_bipartition(const Mat& w) {
  const Index n = w.rows();
  require(n >= 2 && w.cols() == n, "fiedler_bipartition: need a square affinity with >= 2 nodes");
  require_finite(w, "fiedler_bipartition");
  Bipartition out;
  if (n == 2) {
    out.left = {0};
    out.right = {1};
    return out;
  }
  Vec f = detail::fiedler_vector(w);
  Index big = 0;
  f.cwiseAbs().maxCoeff(&big);
  if (f(big) < 0) f = -f;
  for (Index i = 0; i < n; ++i) (f(i) > 1e-12 ? out.right : out.left).push_back(i);
  if (!out.left.empty() && !out.right.empty()) return out;

  out.left.clear();
  out.right.clear();
  if (f.maxCoeff() - f.minCoeff() > 1e-12) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return f(a) < f(b); });
    const std::size_t half = (idx.size() + 1) / 2;
    out.left.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    out.right.assign(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    std::sort(out.left.begin(), out.left.end());
    std::sort(out.right.begin(), out.right.end());
    return out;
  }
  for (Index i = 0; i < n; ++i) (i % 2 == 0 ? out.left : out.right).push_back(i);
  return out;
}

namespace detail {

struct SplitNode {
  std::vector<Index> items;
  Index left = -1, right = -1;
};

inline Mat sub_affinity(const Mat& w, const std::vector<Index>& items) {
  const auto n = static_cast<Index>(items.size());
  Mat s(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) s(a, b) = w(items[static_cast<std::size_t>(a)], items[static_cast<std::size_t>(b)]);
  return s;
}

}  // namespace detail

namespace detail {

// Lays out a binary split hierarchy (node 0 is the root) as padded levels.
inline PartitionTree assemble_tree(const std::vector<SplitNode>& nodes) {
  PartitionTree tree;
  std::vector<Index> frontier{0};  // node id per folder on the current level
  for (;;) {
    std::vector<Folder> level;
    Index offset = 0;
    for (Index id : frontier) {
      Folder f;
      f.offset = offset;
      f.size = static_cast<Index>(nodes[static_cast<std::size_t>(id)].items.size());
      offset += f.size;
      level.push_back(f);
    }
    tree.levels.push_back(std::move(level));
    const bool done = std::all_of(frontier.begin(), frontier.end(),
                                  [&](Index id) { return nodes[static_cast<std::size_t>(id)].items.size() == 1; });
    if (done) break;
    std::vector<Index> next;
    auto& cur = tree.levels.back();
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const auto& node = nodes[static_cast<std::size_t>(frontier[k])];
      if (node.left >= 0) {
        cur[k].children = {static_cast<Index>(next.size()), static_cast<Index>(next.size()) + 1};
        next.push_back(node.left);
        next.push_back(node.right);
      } else {
        cur[k].children = {static_cast<Index>(next.size())};
        next.push_back(frontier[k]);
      }
    }
    frontier = std::move(next);
  }
  for (std::size_t l = 0; l + 1 < tree.levels.size(); ++l)
    for (std::size_t k = 0; k < tree.levels[l].size(); ++k)
      for (Index c : tree.levels[l][k].children) tree.levels[l + 1][static_cast<std::size_t>(c)].parent = static_cast<Index>(k);
  for (Index id : frontier) tree.leaf_order.push_back(nodes[static_cast<std::size_t>(id)].items[0]);
  return tree;
}

}  // namespace detail

// Recursive spectral bipartition down to singletons.
inline PartitionTree build_tree(const Mat& w) {
  const Index n = w.rows();
  require(n >= 1 && w.cols() == n, "build_tree: affinity must be square and non-empty");
  require_finite(w, "build_tree");
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      require(std::abs(w(i, j) - w(j, i)) <= 1e-12 * std::max(1.0, std::abs(w(i, j))), "build_tree: affinity must be symmetric");

  std::vector<detail::SplitNode> nodes(1);
  nodes[0].items.resize(static_cast<std::size_t>(n));
  std::iota(nodes[0].items.begin(), nodes[0].items.end(), Index{0});
  for (std::size_t at = 0; at < nodes.size(); ++at) {
    if (nodes[at].items.size() < 2) continue;
    const std::vector<Index> items = nodes[at].items;
    const Bipartition split = fiedler_bipartition(detail::sub_affinity(w, items));
    detail::SplitNode lhs, rhs;
    for (Index i : split.left) lhs.items.push_back(items[static_cast<std::size_t>(i)]);
    for (Index i : split.right) rhs.items.push_back(items[static_cast<std::size_t>(i)]);
    nodes[at].left = static_cast<Index>(nodes.size());
    nodes[at].right = nodes[at].left + 1;
    nodes.push_back(std::move(lhs));
    nodes.push_back(std::move(rhs));
  }

  return detail::assemble_tree(nodes);
}

// Same leaf sets with single-child chains removed and folders with more than
// two children split into balanced binary groups. Binary trees map to
// themselves.
inline PartitionTree binarized(const PartitionTree& tree) {
  tree.validate();
  std::vector<detail::SplitNode> nodes;
  auto leaves_of = [&](Index offset, Index size) {
    return std::vector<Index>(tree.leaf_order.begin() + offset, tree.leaf_order.begin() + offset + size);
  };
  // Node for folder (l, k) after skipping copies of itself on deeper levels.
  auto add = [&](auto&& self, Index l, Index k) -> Index {
    while (true) {
      const Folder& f = tree.folder(l, k);
      if (f.children.size() == 1 && l + 1 < tree.depth()) {
        k = f.children[0];
        ++l;
      } else {
        break;
      }
    }
    const Folder& f = tree.folder(l, k);
    const auto id = static_cast<Index>(nodes.size());
    nodes.push_back({leaves_of(f.offset, f.size), -1, -1});
    if (f.children.empty()) return id;
    std::vector<Index> kids;
    for (Index c : f.children) kids.push_back(self(self, l + 1, c));
    auto group = [&](auto&& gself, std::size_t lo, std::size_t hi) -> Index {
      if (hi - lo == 1) return kids[lo];
      const std::size_t mid = lo + (hi - lo) / 2;
      const Index a = gself(gself, lo, mid);
      const Index b = gself(gself, mid, hi);
      std::vector<Index> items = nodes[static_cast<std::size_t>(a)].items;
      const auto& more = nodes[static_cast<std::size_t>(b)].items;
      items.insert(items.end(), more.begin(), more.end());
      const auto gid = static_cast<Index>(nodes.size());
      nodes.push_back({std::move(items), a, b});
      return gid;
    };
    const std::size_t half = kids.size() / 2;
    const Index a = kids.size() == 2 ? kids[0] : group(group, 0, half);
    const Index b = kids.size() == 2 ? kids[1] : group(group, half, kids.size());
    nodes[static_cast<std::size_t>(id)].left = a;
    nodes[static_cast<std::size_t>(id)].right = b;
    return id;
  };
  add(add, 0, 0);
  return detail::assemble_tree(nodes);
}

// Balanced binary split of 0..n-1 in index order; left halves take the extra
// element.
inline PartitionTree balanced_tree(Index n) {
  require(n >= 1, "balanced_tree: need at least one leaf");
  std::vector<detail::SplitNode> nodes(1);
  nodes[0].items.resize(static_cast<std::size_t>(n));
  std::iota(nodes[0].items.begin(), nodes[0].items.end(), Index{0});
  for (std::size_t at = 0; at < nodes.size(); ++at) {
    const std::vector<Index> items = nodes[at].items;
    if (items.size() < 2) continue;
    const std::size_t half = (items.size() + 1) / 2;
    nodes[at].left = static_cast<Index>(nodes.size());
    nodes[at].right = nodes[at].left + 1;
    nodes.push_back({std::vector<Index>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(half)), -1, -1});
    nodes.push_back({std::vector<Index>(items.begin() + static_cast<std::ptrdiff_t>(half), items.end()), -1, -1});
  }
  return detail::assemble_tree(nodes);
}

// For each level with at least one split: the smallest ratio of smaller to
// larger child size. Diagnostic only.
inline std::vector<double> balance_ratios(const PartitionTree& tree) {
  std::vector<double> out;
  for (std::size_t l = 0; l + 1 < tree.levels.size(); ++l) {
    double worst = 1.0;
    bool any = false;
    for (const Folder& f : tree.levels[l]) {
      if (f.children.size() < 2) continue;
      Index lo = f.size, hi = 0;
      for (Index c : f.children) {
        const Index s = tree.levels[l + 1][static_cast<std::size_t>(c)].size;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
      worst = std::min(worst, static_cast<double>(lo) / static_cast<double>(hi));
      any = true;
    }
    if (any) out.push_back(worst);
  }
  return out;
}

// Size of the smallest folder holding both leaves; 0 for a leaf with itself.
inline Index tree_distance(const PartitionTree& tree, Index x, Index y) {
  require(x >= 0 && y >= 0 && x < tree.leaves() && y < tree.leaves(), "tree_distance: leaf out of range");
  if (x == y) return 0;
  Index px = -1, py = -1;
  for (Index s = 0; s < tree.leaves(); ++s) {
    if (tree.leaf_order[static_cast<std::size_t>(s)] == x) px = s;
    if (tree.leaf_order[static_cast<std::size_t>(s)] == y) py = s;
  }
  Index best = tree.leaves();
  for (const auto& level : tree.levels)
    for (const Folder& f : level)
      if (px >= f.offset && px < f.offset + f.size && py >= f.offset && py < f.offset + f.size)
        best = std::min(best, f.size);
  return best;
}

// ---------------------------------------------------------------------------
// Tree transport distance

struct EmdParams {
  double a = 0.0;  // level decay exponent
  double b = 1.0;  // folder size exponent
  double eps_factor = 1.0;
};

// Precomputed weights of a tree: every folder of size >= 2 becomes a block
// term, and the singleton folders of a leaf collapse into one per-leaf factor.
class EmdKernel {
 public:
  EmdKernel(const PartitionTree& tree, const EmdParams& prm) : order_(tree.leaf_order) {
    leaf_weight_ = Vec::Zero(tree.leaves());
    for (std::size_t l = 0; l < tree.levels.size(); ++l) {
      const double level_w = std::pow(2.0, -prm.a * static_cast<double>(l + 1));
      for (const Folder& f : tree.levels[l]) {
        const double w = level_w * std::pow(static_cast<double>(f.size), prm.b) / static_cast<double>(f.size);
        if (f.size == 1)
          leaf_weight_(f.offset) += w;
        else
          blocks_.push_back({f.offset, f.size, w});
      }
    }
  }

  [[nodiscard]] Index leaves() const { return static_cast<Index>(order_.size()); }
  [[nodiscard]] const std::vector<Index>& order() const { return order_; }

  // diff must be in leaf order; scratch must hold leaves()+1 doubles.
  [[nodiscard]] double apply(const double* diff, double* scratch) const {
    const Index n = leaves();
    double single = 0.0;
    scratch[0] = 0.0;
    for (Index s = 0; s < n; ++s) {
      single += std::abs(diff[s]) * leaf_weight_(s);
      scratch[s + 1] = scratch[s] + diff[s] * diff[s];
    }
    double total = single;
    for (const Block& blk : blocks_) {
      const double e = scratch[blk.offset + blk.size] - scratch[blk.offset];
      total += std::sqrt(std::max(0.0, e)) * blk.w;
    }
    return total;
  }

 private:
  struct Block {
    Index offset, size;
    double w;
  };
  std::vector<Index> order_;
  std::vector<Block> blocks_;
  Vec leaf_weight_;
};

inline double tree_emd(const Vec& f, const Vec& g, const PartitionTree& tree, const EmdParams& prm = {}) {
  require(f.size() == tree.leaves() && g.size() == tree.leaves(), "tree_emd: length mismatch");
  const EmdKernel kernel(tree, prm);
  std::vector<double> diff(static_cast<std::size_t>(tree.leaves())), scratch(diff.size() + 1);
  for (Index s = 0; s < tree.leaves(); ++s) {
    const Index v = tree.leaf_order[static_cast<std::size_t>(s)];
    diff[static_cast<std::size_t>(s)] = f(v) - g(v);
  }
  return kernel.apply(diff.data(), scratch.data());
}

// Pairwise tree EMD between the rows of m, with the tree over m's columns.
inline Mat pairwise_emd(const Mat& m, const PartitionTree& col_tree, const EmdParams& prm) {
  require(m.cols() == col_tree.leaves(), "pairwise_emd: tree does not match the column count");
  const EmdKernel kernel(col_tree, prm);
  const Index p = m.rows(), n = m.cols();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ordered(p, n);
  for (Index s = 0; s < n; ++s) ordered.col(s) = m.col(col_tree.leaf_order[static_cast<std::size_t>(s)]);
  Mat d = Mat::Zero(p, p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t ii) {
    const auto i = static_cast<Index>(ii);
    std::vector<double> diff(static_cast<std::size_t>(n)), scratch(static_cast<std::size_t>(n) + 1);
    for (Index j = i + 1; j < p; ++j) {
      for (Index s = 0; s < n; ++s) diff[static_cast<std::size_t>(s)] = ordered(i, s) - ordered(j, s);
      d(i, j) = kernel.apply(diff.data(), scratch.data());
    }
  });
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) d(j, i) = d(i, j);
  return d;
}

// exp(-EMD/eps) between rows of m, eps = eps_factor * median pairwise EMD.
inline Mat dual_affinity(const Mat& m, const PartitionTree& col_tree, const EmdParams& prm = {},
                         std::vector<std::string>* notes = nullptr) {
  require_finite(m, "dual_affinity");
  const Index p = m.rows();
  if (p == 1) return Mat::Ones(1, 1);
  const Mat d = pairwise_emd(m, col_tree, prm);
  auto all = upper_triangle(d);
  double med = median_of(all);
  if (med <= 0.0) {
    std::vector<double> pos;
    for (double x : all)
      if (x > 0.0) pos.push_back(x);
    if (pos.empty()) {
      if (notes) notes->push_back("dual_affinity: all rows identical; using a constant affinity");
      return Mat::Ones(p, p);
    }
    med = median_of(std::move(pos));
  }
  const double eps = prm.eps_factor * med;
  require(eps > 0.0, "dual_affinity: eps_factor must be positive");
  return (-d.array() / eps).exp().matrix();
}

struct TreePair {
  PartitionTree rows;
  PartitionTree cols;
};

enum class QuestionnaireStart { Columns, Rows };

// Initial tree from a Gaussian affinity on one axis, then `iters` rounds of
// dual affinities: rows from the column tree, then columns from the row tree.
inline TreePair questionnaire(const Mat& m, int iters = 3, const EmdParams& prm = {},
                              QuestionnaireStart start = QuestionnaireStart::Columns,
                              std::vector<std::string>* notes = nullptr) {
  require_finite(m, "questionnaire");
  require(iters >= 1, "questionnaire: iters must be >= 1");
  const Mat mt = m.transpose();
  auto initial = [&](const Mat& points) {
    try {
      return build_tree(gaussian_affinity(points));
    } catch (const DegenerateInput&) {
      if (notes) notes->push_back("questionnaire: identical points; starting from a constant affinity");
      return build_tree(Mat::Ones(points.rows(), points.rows()));
    }
  };
  TreePair out;
  if (start == QuestionnaireStart::Columns) {
    out.cols = initial(mt);
    for (int it = 0; it < iters; ++it) {
      out.rows = build_tree(dual_affinity(m, out.cols, prm, notes));
      out.cols = build_tree(dual_affinity(mt, out.rows, prm, notes));
    }
  } else {
    out.rows = initial(m);
    for (int it = 0; it < iters; ++it) {
      out.cols = build_tree(dual_affinity(mt, out.rows, prm, notes));
      out.rows = build_tree(dual_affinity(m, out.cols, prm, notes));
    }
  }
  return out;
}

}  // namespace eows
