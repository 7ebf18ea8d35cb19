#pragma once

// Generalized Haar-Walsh dictionaries on partition trees, best-basis search
// over time/frequency tilings in one and two dimensions, and the matching
// analysis/synthesis operators.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "matcore.hpp"
#include "treegeo.hpp"

namespace eows {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// tag is the rank of the atom within its folder in sequency order.
struct AtomId {
  Index level = 0;
  Index folder = 0;
  Index tag = 0;
  auto operator<=>(const AtomId&) const = default;
};

struct Tile {
  AtomId row;
  AtomId col;
  auto operator<=>(const Tile&) const = default;
};

// Structure of the dictionary on one tree, independent of data. Coefficients
// of a signal are stored level by level: entry level*N + slot, where slots of
// a folder are contiguous (same range as its leaves) and sorted by sequency.
class GhwtLayout {
 public:
  using Label = unsigned __int128;

  struct Op {
    Index src1;
    double w1;
    Index src2;  // -1 when the parent entry copies a single child entry
    double w2;
  };

  explicit GhwtLayout(const PartitionTree& input) : tree_(binarized(input)) {
    const Index levels = tree_.depth();
    require(levels <= 127, "transform: tree deeper than 127 levels");
    const Index n = tree_.leaves();
    labels_.assign(static_cast<std::size_t>(levels), std::vector<Label>(static_cast<std::size_t>(n), 0));
    plans_.assign(static_cast<std::size_t>(levels), {});
    folder_of_.assign(static_cast<std::size_t>(levels), std::vector<Index>(static_cast<std::size_t>(n), 0));
    for (Index l = 0; l < levels; ++l)
      for (std::size_t k = 0; k < tree_.levels[static_cast<std::size_t>(l)].size(); ++k) {
        const Folder& f = tree_.levels[static_cast<std::size_t>(l)][k];
        for (Index s = f.offset; s < f.offset + f.size; ++s)
          folder_of_[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] = static_cast<Index>(k);
      }
    for (Index l = levels - 2; l >= 0; --l) build_level(l);
  }

  [[nodiscard]] const PartitionTree& tree() const { return tree_; }
  [[nodiscard]] Index leaves() const { return tree_.leaves(); }
  [[nodiscard]] Index levels() const { return tree_.depth(); }
  [[nodiscard]] Index size() const { return leaves() * levels(); }
  [[nodiscard]] Label label(Index level, Index slot) const {
    return labels_[static_cast<std::size_t>(level)][static_cast<std::size_t>(slot)];
  }
  [[nodiscard]] Index folder_of(Index level, Index slot) const {
    return folder_of_[static_cast<std::size_t>(level)][static_cast<std::size_t>(slot)];
  }
  [[nodiscard]] const std::vector<Op>& plan(Index level) const { return plans_[static_cast<std::size_t>(level)]; }

  [[nodiscard]] Index index_of(const AtomId& a) const {
    require(a.level >= 0 && a.level < levels(), "atom: level out of range");
    const auto& lev = tree_.levels[static_cast<std::size_t>(a.level)];
    require(a.folder >= 0 && a.folder < static_cast<Index>(lev.size()), "atom: folder out of range");
    const Folder& f = lev[static_cast<std::size_t>(a.folder)];
    require(a.tag >= 0 && a.tag < f.size, "atom: tag out of range");
    return a.level * leaves() + f.offset + a.tag;
  }
  [[nodiscard]] AtomId atom_at(Index index) const {
    const Index l = index / leaves(), s = index % leaves();
    const Index k = folder_of(l, s);
    return {l, k, s - tree_.folder(l, k).offset};
  }

  // Analysis of each column of x (rows indexed by original leaf id).
  // Returns size() x x.cols(), row-major.
  [[nodiscard]] RowMat analyze(const Mat& x) const {
    require(x.rows() == leaves(), "analyze: length does not match the tree");
    const Index n = leaves(), levels_n = levels();
    RowMat out(size(), x.cols());
    const Index base = (levels_n - 1) * n;
    for (Index s = 0; s < n; ++s) out.row(base + s) = x.row(tree_.leaf_order[static_cast<std::size_t>(s)]);
    for (Index l = levels_n - 2; l >= 0; --l) {
      const Index dst = l * n, src = (l + 1) * n;
      const auto& ops = plan(l);
      for (Index s = 0; s < n; ++s) {
        const Op& op = ops[static_cast<std::size_t>(s)];
        if (op.src2 < 0)
          out.row(dst + s) = op.w1 * out.row(src + op.src1);
        else
          out.row(dst + s) = op.w1 * out.row(src + op.src1) + op.w2 * out.row(src + op.src2);
      }
    }
    return out;
  }

  [[nodiscard]] Vec analyze(const Vec& v) const {
    const RowMat r = analyze(Mat(v));
    return r.col(0);
  }

  // Adjoint of analyze: sum of coefficient * atom over every stacked entry.
  [[nodiscard]] Mat synthesize(const RowMat& coeffs) const {
    require(coeffs.rows() == size(), "synthesize: coefficient count does not match the tree");
    const Index n = leaves(), levels_n = levels();
    RowMat acc = coeffs.topRows(n);
    for (Index l = 0; l + 1 < levels_n; ++l) {
      RowMat next = coeffs.middleRows((l + 1) * n, n);
      const auto& ops = plan(l);
      for (Index s = 0; s < n; ++s) {
        const Op& op = ops[static_cast<std::size_t>(s)];
        next.row(op.src1) += op.w1 * acc.row(s);
        if (op.src2 >= 0) next.row(op.src2) += op.w2 * acc.row(s);
      }
      acc = std::move(next);
    }
    Mat out(n, coeffs.cols());
    for (Index s = 0; s < n; ++s) out.row(tree_.leaf_order[static_cast<std::size_t>(s)]) = acc.row(s);
    return out;
  }

  [[nodiscard]] Vec synthesize(const Vec& coeffs) const {
    const RowMat c = coeffs;
    return synthesize(c).col(0);
  }

  [[nodiscard]] Vec atom_vector(const AtomId& a) const {
    Vec c = Vec::Zero(size());
    c(index_of(a)) = 1.0;
    return synthesize(c);
  }

 private:
  void build_level(Index l) {
    const Index n = leaves();
    auto& labels = labels_[static_cast<std::size_t>(l)];
    const auto& below = labels_[static_cast<std::size_t>(l + 1)];
    auto& ops = plans_[static_cast<std::size_t>(l)];
    ops.assign(static_cast<std::size_t>(n), Op{0, 0.0, -1, 0.0});
    const double r2 = 1.0 / std::sqrt(2.0);
    for (const Folder& f : tree_.levels[static_cast<std::size_t>(l)]) {
      Index out = f.offset;
      auto emit = [&](Label lab, Op op) {
        labels[static_cast<std::size_t>(out)] = lab;
        ops[static_cast<std::size_t>(out)] = op;
        ++out;
      };
      const auto& kids = f.children;
      if (kids.size() == 1) {
        const Folder& c = tree_.folder(l + 1, kids[0]);
        for (Index s = c.offset; s < c.offset + c.size; ++s) emit(below[static_cast<std::size_t>(s)] * 2, {s, 1.0, -1, 0.0});
        continue;
      }
      const Folder& a = tree_.folder(l + 1, kids[0]);
      const Folder& b = tree_.folder(l + 1, kids[1]);
      const double na = static_cast<double>(a.size), nb = static_cast<double>(b.size);
      const double nt = na + nb;
      // Scaling and Haar pair from the two children's scaling entries.
      emit(0, {a.offset, std::sqrt(na / nt), b.offset, std::sqrt(nb / nt)});
      emit(1, {a.offset, std::sqrt(nb / nt), b.offset, -std::sqrt(na / nt)});
      Index ia = a.offset + 1, ib = b.offset + 1;
      const Index ea = a.offset + a.size, eb = b.offset + b.size;
      while (ia < ea || ib < eb) {
        const Label la = ia < ea ? below[static_cast<std::size_t>(ia)] : ~Label{0};
        const Label lb = ib < eb ? below[static_cast<std::size_t>(ib)] : ~Label{0};
        if (la == lb) {
          // Sequency ordering: the second child enters with sign (-1)^t.
          const double sgn = (la & 1) ? -r2 : r2;
          emit(la * 2, {ia, r2, ib, sgn});
          emit(la * 2 + 1, {ia, r2, ib, -sgn});
          ++ia;
          ++ib;
        } else if (la < lb) {
          emit(la * 2, {ia, 1.0, -1, 0.0});
          ++ia;
        } else {
          emit(lb * 2, {ib, 1.0, -1, 0.0});
          ++ib;
        }
      }
    }
  }

  PartitionTree tree_;
  std::vector<std::vector<Label>> labels_;
  std::vector<std::vector<Op>> plans_;
  std::vector<std::vector<Index>> folder_of_;
};

// ---------------------------------------------------------------------------
// Time/frequency regions. A region is a run of same-folder slots on one level
// whose labels share the prefix label >> span. It can be cut in frequency
// (same level, next label bit) or in time (children, one fewer bit). Regions
// with span 0 are single atoms.

class RegionGraph {
 public:
  struct Region {
    Index level, begin, end;  // slot range on `level`
    int span;
    Index freq[2] = {-1, -1};
    std::vector<Index> time;
  };

  explicit RegionGraph(const GhwtLayout& layout) : layout_(&layout) {
    root_ = make(0, 0, layout.leaves(), static_cast<int>(layout.levels() - 1));
    order_.resize(regions_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<Index>(i);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return region(a).span < region(b).span; });
  }

  [[nodiscard]] const GhwtLayout& layout() const { return *layout_; }
  [[nodiscard]] Index root() const { return root_; }
  [[nodiscard]] Index count() const { return static_cast<Index>(regions_.size()); }
  [[nodiscard]] const Region& region(Index id) const { return regions_[static_cast<std::size_t>(id)]; }
  // Region ids ordered so every split's parts come before the region itself.
  [[nodiscard]] const std::vector<Index>& bottom_up() const { return order_; }
  // Stacked coefficient index of an atom region.
  [[nodiscard]] Index atom_index(Index id) const {
    const Region& r = region(id);
    return r.level * layout_->leaves() + r.begin;
  }

 private:
  Index make(Index level, Index begin, Index end, int span) {
    if (begin >= end) return -1;
    const auto key = std::make_tuple(level, begin, end, span);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const auto id = static_cast<Index>(regions_.size());
    regions_.push_back({level, begin, end, span, {-1, -1}, {}});
    memo_.emplace(key, id);
    if (span == 0) return id;
    using Label = GhwtLayout::Label;
    const Label bit = Label{1} << (span - 1);
    Index mid = begin;
    while (mid < end && (layout_->label(level, mid) & bit) == 0) ++mid;
    const Index f0 = make(level, begin, mid, span - 1);
    const Index f1 = make(level, mid, end, span - 1);
    std::vector<Index> time;
    if (level + 1 < layout_->levels()) {
      const Label prefix = layout_->label(level, begin) >> span;
      const Folder& f = layout_->tree().folder(level, layout_->folder_of(level, begin));
      for (Index c : f.children) {
        const Folder& cf = layout_->tree().folder(level + 1, c);
        Index lo = cf.offset;
        while (lo < cf.offset + cf.size && (layout_->label(level + 1, lo) >> (span - 1)) < prefix) ++lo;
        Index hi = lo;
        while (hi < cf.offset + cf.size && (layout_->label(level + 1, hi) >> (span - 1)) == prefix) ++hi;
        const Index t = make(level + 1, lo, hi, span - 1);
        if (t >= 0) time.push_back(t);
      }
    }
    Region& r = regions_[static_cast<std::size_t>(id)];
    r.freq[0] = f0;
    r.freq[1] = f1;
    r.time = std::move(time);
    return id;
  }

  const GhwtLayout* layout_;
  std::vector<Region> regions_;
  std::map<std::tuple<Index, Index, Index, int>, Index> memo_;
  std::vector<Index> order_;
  Index root_ = -1;
};

inline double tile_cost(double c, double ell) {
  const double a = std::abs(c);
  return ell == 1.0 ? a : std::pow(a, ell);
}

// ---------------------------------------------------------------------------
// One-dimensional best basis

struct BestBasis1D {
  std::vector<AtomId> atoms;
  double cost = 0.0;
};

namespace detail {

// Bottom-up minimum over splits. On ties the frequency cut wins, which keeps
// coefficients on coarser levels.
struct Solve1D {
  std::vector<double> cost;
  std::vector<std::uint8_t> choice;  // 0 = frequency cut, 1 = time cut
};

inline Solve1D solve_1d(const RegionGraph& g, const double* atom_cost) {
  Solve1D out;
  out.cost.assign(static_cast<std::size_t>(g.count()), 0.0);
  out.choice.assign(static_cast<std::size_t>(g.count()), 0);
  auto at = [&](Index id) { return id < 0 ? 0.0 : out.cost[static_cast<std::size_t>(id)]; };
  for (Index id : g.bottom_up()) {
    const auto& r = g.region(id);
    if (r.span == 0) {
      out.cost[static_cast<std::size_t>(id)] = atom_cost[g.atom_index(id)];
      continue;
    }
    const double fc = at(r.freq[0]) + at(r.freq[1]);
    double best = fc;
    std::uint8_t pick = 0;
    if (!r.time.empty()) {
      double tc = 0.0;
      for (Index t : r.time) tc += at(t);
      if (tc < best) {
        best = tc;
        pick = 1;
      }
    }
    out.cost[static_cast<std::size_t>(id)] = best;
    out.choice[static_cast<std::size_t>(id)] = pick;
  }
  return out;
}

inline void collect_1d(const RegionGraph& g, const Solve1D& s, Index id, std::vector<Index>& atoms) {
  if (id < 0) return;
  const auto& r = g.region(id);
  if (r.span == 0) {
    atoms.push_back(g.atom_index(id));
    return;
  }
  if (s.choice[static_cast<std::size_t>(id)] == 0) {
    collect_1d(g, s, r.freq[0], atoms);
    collect_1d(g, s, r.freq[1], atoms);
  } else {
    for (Index t : r.time) collect_1d(g, s, t, atoms);
  }
}

}  // namespace detail

inline BestBasis1D best_basis_1d(const Vec& v, const RegionGraph& g, double ell = 1.0) {
  require(ell > 0, "best_basis: ell must be positive");
  const GhwtLayout& layout = g.layout();
  const Vec c = layout.analyze(v);
  std::vector<double> cost(static_cast<std::size_t>(c.size()));
  for (Index i = 0; i < c.size(); ++i) cost[static_cast<std::size_t>(i)] = tile_cost(c(i), ell);
  const auto solved = detail::solve_1d(g, cost.data());
  std::vector<Index> idx;
  detail::collect_1d(g, solved, g.root(), idx);
  BestBasis1D out;
  out.cost = solved.cost[static_cast<std::size_t>(g.root())];
  for (Index i : idx) out.atoms.push_back(layout.atom_at(i));
  return out;
}

inline Vec transform_1d(const Vec& v, const GhwtLayout& layout, const std::vector<AtomId>& atoms) {
  const Vec c = layout.analyze(v);
  Vec out(static_cast<Index>(atoms.size()));
  for (std::size_t i = 0; i < atoms.size(); ++i) out(static_cast<Index>(i)) = c(layout.index_of(atoms[i]));
  return out;
}

inline Vec inverse_1d(const Vec& coeffs, const GhwtLayout& layout, const std::vector<AtomId>& atoms) {
  require(coeffs.size() == static_cast<Index>(atoms.size()), "inverse_1d: coefficient count mismatch");
  Vec c = Vec::Zero(layout.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) c(layout.index_of(atoms[i])) += coeffs(static_cast<Index>(i));
  return layout.synthesize(c);
}

// ---------------------------------------------------------------------------
// Two-dimensional tilings

enum class TilingFamily {
  Anisotropic,  // any interleaving of row and column cuts
  RowFirst,     // row cuts down to atoms, then a column tiling per row atom
  ColumnFirst,
};

inline const char* family_name(TilingFamily f) {
  switch (f) {
    case TilingFamily::Anisotropic: return "anisotropic";
    case TilingFamily::RowFirst: return "row-first";
    case TilingFamily::ColumnFirst: return "column-first";
  }
  return "?";
}

struct BestBasis2D {
  std::vector<Tile> tiles;
  double ell = 1.0;
  double cost = 0.0;
  TilingFamily family = TilingFamily::Anisotropic;
};

struct CoeffMap {
  std::vector<Tile> tiles;
  std::vector<double> values;
};

class TensorGhwt {
 public:
  // Pair-table size above which the search falls back to the row-first and
  // column-first families.
  static constexpr std::size_t kDefaultExactBudget = std::size_t{1} << 24;

  TensorGhwt(const PartitionTree& rows, const PartitionTree& cols)
      : row_layout_(rows), col_layout_(cols), row_graph_(row_layout_), col_graph_(col_layout_) {}
  // The region graphs point into the layouts, so the object stays put.
  TensorGhwt(const TensorGhwt&) = delete;
  TensorGhwt& operator=(const TensorGhwt&) = delete;

  [[nodiscard]] const GhwtLayout& rows() const { return row_layout_; }
  [[nodiscard]] const GhwtLayout& cols() const { return col_layout_; }
  [[nodiscard]] const RegionGraph& row_regions() const { return row_graph_; }
  [[nodiscard]] const RegionGraph& col_regions() const { return col_graph_; }

  [[nodiscard]] bool exact_fits(std::size_t budget = kDefaultExactBudget) const {
    return static_cast<std::size_t>(row_graph_.count()) * static_cast<std::size_t>(col_graph_.count()) <= budget &&
           static_cast<std::size_t>(row_layout_.size()) * static_cast<std::size_t>(col_layout_.size()) <= budget;
  }

  // Every row-atom by column-atom coefficient: rows().size() x cols().size().
  [[nodiscard]] RowMat full_table(const Mat& m) const {
    check_shape(m);
    const RowMat by_rows = row_layout_.analyze(m);
    const RowMat t = col_layout_.analyze(Mat(by_rows.transpose()));
    return t.transpose();
  }

  // Row analysis: entry (row atom, column) = <row atom, m(:, column)>.
  [[nodiscard]] RowMat row_analysis(const Mat& m) const {
    check_shape(m);
    return row_layout_.analyze(m);
  }
  [[nodiscard]] RowMat col_analysis(const Mat& m) const {
    check_shape(m);
    return col_layout_.analyze(Mat(m.transpose()));
  }

  [[nodiscard]] BestBasis2D best_basis(const Mat& m, double ell = 1.0,
                                       std::size_t budget = kDefaultExactBudget) const {
    require(ell > 0, "best_basis: ell must be positive");
    check_shape(m);
    if (exact_fits(budget)) return best_exact(m, ell);
    BestBasis2D a = best_row_first(m, ell, false);
    BestBasis2D b = best_row_first(m, ell, true);
    return b.cost < a.cost ? b : a;
  }

  [[nodiscard]] BestBasis2D best_exact(const Mat& m, double ell) const;
  [[nodiscard]] BestBasis2D best_row_first(const Mat& m, double ell, bool columns_first) const;

  [[nodiscard]] CoeffMap transform(const Mat& m, const std::vector<Tile>& tiles) const {
    check_shape(m);
    check_tiling(tiles);
    const RowMat by_rows = row_layout_.analyze(m);
    std::map<Index, std::vector<std::size_t>> groups;
    for (std::size_t t = 0; t < tiles.size(); ++t) groups[row_layout_.index_of(tiles[t].row)].push_back(t);
    CoeffMap out{tiles, std::vector<double>(tiles.size(), 0.0)};
    for (const auto& [ri, members] : groups) {
      const Vec line = by_rows.row(ri).transpose();
      const Vec c = col_layout_.analyze(line);
      for (std::size_t t : members) out.values[t] = c(col_layout_.index_of(tiles[t].col));
    }
    return out;
  }

  [[nodiscard]] Mat inverse(const CoeffMap& coeffs) const {
    require(coeffs.tiles.size() == coeffs.values.size(), "inverse: tiles and values differ in length");
    check_tiling(coeffs.tiles);
    std::map<Index, std::vector<std::size_t>> groups;
    for (std::size_t t = 0; t < coeffs.tiles.size(); ++t)
      groups[row_layout_.index_of(coeffs.tiles[t].row)].push_back(t);
    RowMat by_rows = RowMat::Zero(row_layout_.size(), col_layout_.leaves());
    for (const auto& [ri, members] : groups) {
      Vec c = Vec::Zero(col_layout_.size());
      for (std::size_t t : members) c(col_layout_.index_of(coeffs.tiles[t].col)) += coeffs.values[t];
      by_rows.row(ri) = col_layout_.synthesize(c).transpose();
    }
    return row_layout_.synthesize(by_rows);
  }

  [[nodiscard]] double cost_of(const Mat& m, const std::vector<Tile>& tiles, double ell) const {
    const CoeffMap c = transform(m, tiles);
    double total = 0.0;
    for (double v : c.values) total += tile_cost(v, ell);
    return total;
  }

 private:
  void check_shape(const Mat& m) const {
    require(m.rows() == row_layout_.leaves() && m.cols() == col_layout_.leaves(),
            "tensor transform: matrix shape does not match the trees");
    require_finite(m, "tensor transform");
  }

  // Count and uniqueness always; pairwise disjointness of the tiles in the
  // time/frequency plane when the tiling is small enough to check directly.
  void check_tiling(const std::vector<Tile>& tiles) const {
    const auto expected = static_cast<std::size_t>(row_layout_.leaves() * col_layout_.leaves());
    require(tiles.size() == expected, "tiling covers " + std::to_string(tiles.size()) + " coefficients, expected " +
                                          std::to_string(expected));
    std::vector<std::pair<Index, Index>> keys;
    keys.reserve(tiles.size());
    for (const Tile& t : tiles) keys.emplace_back(row_layout_.index_of(t.row), col_layout_.index_of(t.col));
    std::sort(keys.begin(), keys.end());
    require(std::adjacent_find(keys.begin(), keys.end()) == keys.end(), "tiling repeats a tile");
    if (tiles.size() > 4096) return;
    for (std::size_t i = 0; i < tiles.size(); ++i)
      for (std::size_t j = i + 1; j < tiles.size(); ++j)
        require(!(overlaps(row_layout_, tiles[i].row, tiles[j].row) && overlaps(col_layout_, tiles[i].col, tiles[j].col)),
                "tiling has overlapping tiles");
  }

  // Two atoms overlap in the time/frequency plane when one's folder contains
  // the other's and their labels agree on the coarser atom's bits.
  static bool overlaps(const GhwtLayout& lay, const AtomId& a, const AtomId& b) {
    const AtomId& hi = a.level <= b.level ? a : b;
    const AtomId& lo = a.level <= b.level ? b : a;
    const Folder& fh = lay.tree().folder(hi.level, hi.folder);
    const Folder& fl = lay.tree().folder(lo.level, lo.folder);
    if (fl.offset < fh.offset || fl.offset + fl.size > fh.offset + fh.size) return false;
    const auto lh = lay.label(hi.level, fh.offset + hi.tag);
    const auto ll = lay.label(lo.level, fl.offset + lo.tag);
    return (lh >> (lo.level - hi.level)) == ll;
  }

  GhwtLayout row_layout_, col_layout_;
  RegionGraph row_graph_, col_graph_;
};

// Choice codes for the anisotropic search, in tie-break order.
namespace detail {
enum : std::uint8_t { kRowFreq = 0, kRowTime = 1, kColFreq = 2, kColTime = 3, kLeaf = 4 };
}

inline BestBasis2D TensorGhwt::best_exact(const Mat& m, double ell) const {
  const RowMat table = full_table(m);
  const Index nr = row_graph_.count(), nc = col_graph_.count();
  std::vector<double> cost(static_cast<std::size_t>(nr * nc), 0.0);
  std::vector<std::uint8_t> choice(cost.size(), detail::kLeaf);
  auto at = [&](Index i, Index j) {
    return (i < 0 || j < 0) ? 0.0 : cost[static_cast<std::size_t>(i * nc + j)];
  };
  for (Index i : row_graph_.bottom_up()) {
    const auto& ri = row_graph_.region(i);
    for (Index j : col_graph_.bottom_up()) {
      const auto& cj = col_graph_.region(j);
      double best;
      std::uint8_t pick;
      if (ri.span == 0 && cj.span == 0) {
        best = tile_cost(table(row_graph_.atom_index(i), col_graph_.atom_index(j)), ell);
        pick = detail::kLeaf;
      } else {
        best = std::numeric_limits<double>::infinity();
        pick = detail::kLeaf;
        auto offer = [&](double v, std::uint8_t code) {
          if (v < best) {
            best = v;
            pick = code;
          }
        };
        if (ri.span > 0) {
          offer(at(ri.freq[0], j) + at(ri.freq[1], j), detail::kRowFreq);
          if (!ri.time.empty()) {
            double s = 0.0;
            for (Index t : ri.time) s += at(t, j);
            offer(s, detail::kRowTime);
          }
        }
        if (cj.span > 0) {
          offer(at(i, cj.freq[0]) + at(i, cj.freq[1]), detail::kColFreq);
          if (!cj.time.empty()) {
            double s = 0.0;
            for (Index t : cj.time) s += at(i, t);
            offer(s, detail::kColTime);
          }
        }
      }
      cost[static_cast<std::size_t>(i * nc + j)] = best;
      choice[static_cast<std::size_t>(i * nc + j)] = pick;
    }
  }
  BestBasis2D out;
  out.ell = ell;
  out.family = TilingFamily::Anisotropic;
  out.cost = at(row_graph_.root(), col_graph_.root());
  std::vector<std::pair<Index, Index>> stack{{row_graph_.root(), col_graph_.root()}};
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    if (i < 0 || j < 0) continue;
    const auto& ri = row_graph_.region(i);
    const auto& cj = col_graph_.region(j);
    switch (choice[static_cast<std::size_t>(i * nc + j)]) {
      case detail::kLeaf:
        out.tiles.push_back({row_layout_.atom_at(row_graph_.atom_index(i)), col_layout_.atom_at(col_graph_.atom_index(j))});
        break;
      case detail::kRowFreq:
        stack.emplace_back(ri.freq[1], j);
        stack.emplace_back(ri.freq[0], j);
        break;
      case detail::kRowTime:
        for (auto it = ri.time.rbegin(); it != ri.time.rend(); ++it) stack.emplace_back(*it, j);
        break;
      case detail::kColFreq:
        stack.emplace_back(i, cj.freq[1]);
        stack.emplace_back(i, cj.freq[0]);
        break;
      case detail::kColTime:
        for (auto it = cj.time.rbegin(); it != cj.time.rend(); ++it) stack.emplace_back(i, *it);
        break;
    }
  }
  return out;
}

inline BestBasis2D TensorGhwt::best_row_first(const Mat& m, double ell, bool columns_first) const {
  const GhwtLayout& outer = columns_first ? col_layout_ : row_layout_;
  const GhwtLayout& inner = columns_first ? row_layout_ : col_layout_;
  const RegionGraph& outer_graph = columns_first ? col_graph_ : row_graph_;
  const RegionGraph& inner_graph = columns_first ? row_graph_ : col_graph_;
  const RowMat by_outer = columns_first ? col_layout_.analyze(Mat(m.transpose())) : row_layout_.analyze(m);

  auto inner_solve = [&](Index outer_index, std::vector<Index>* atoms) {
    const Vec c = inner.analyze(Vec(by_outer.row(outer_index).transpose()));
    std::vector<double> costs(static_cast<std::size_t>(c.size()));
    for (Index i = 0; i < c.size(); ++i) costs[static_cast<std::size_t>(i)] = tile_cost(c(i), ell);
    const auto solved = detail::solve_1d(inner_graph, costs.data());
    if (atoms) detail::collect_1d(inner_graph, solved, inner_graph.root(), *atoms);
    return solved.cost[static_cast<std::size_t>(inner_graph.root())];
  };

  std::vector<double> outer_cost(static_cast<std::size_t>(outer.size()));
  parallel_for(outer_cost.size(), [&](std::size_t k) { outer_cost[k] = inner_solve(static_cast<Index>(k), nullptr); });
  const auto solved = detail::solve_1d(outer_graph, outer_cost.data());
  std::vector<Index> outer_atoms;
  detail::collect_1d(outer_graph, solved, outer_graph.root(), outer_atoms);

  BestBasis2D out;
  out.ell = ell;
  out.family = columns_first ? TilingFamily::ColumnFirst : TilingFamily::RowFirst;
  out.cost = solved.cost[static_cast<std::size_t>(outer_graph.root())];
  for (Index oi : outer_atoms) {
    std::vector<Index> inner_atoms;
    inner_solve(oi, &inner_atoms);
    const AtomId oa = outer.atom_at(oi);
    for (Index ii : inner_atoms) {
      const AtomId ia = inner.atom_at(ii);
      out.tiles.push_back(columns_first ? Tile{ia, oa} : Tile{oa, ia});
    }
  }
  return out;
}

}  // namespace eows
