#pragma once

// Tiling helpers shared by the transform tests and the acceptance binary:
// random admissible tilings, the tensor Haar tiling, and a brute-force search
// over tilings of the time/frequency plane for uniform dyadic trees.

#include <bitset>
#include <functional>
#include <limits>
#include <set>
#include <utility>
#include <algorithm>
#include <random>
#include <vector>

#include "eows/hwt.hpp"

namespace eows::testing {

inline std::vector<AtomId> random_tiling_1d(const RegionGraph& g, std::mt19937_64& rng) {
  std::vector<AtomId> out;
  std::function<void(Index)> walk = [&](Index id) {
    if (id < 0) return;
    const auto& r = g.region(id);
    if (r.span == 0) {
      out.push_back(g.layout().atom_at(g.atom_index(id)));
      return;
    }
    const bool time = !r.time.empty() && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    if (time) {
      for (Index t : r.time) walk(t);
    } else {
      walk(r.freq[0]);
      walk(r.freq[1]);
    }
  };
  walk(g.root());
  return out;
}

// Random interleaving of row and column cuts.
inline std::vector<Tile> random_tiling_2d(const TensorGhwt& t, std::mt19937_64& rng) {
  std::vector<Tile> out;
  const RegionGraph& rg = t.row_regions();
  const RegionGraph& cg = t.col_regions();
  std::function<void(Index, Index)> walk = [&](Index i, Index j) {
    if (i < 0 || j < 0) return;
    const auto& ri = rg.region(i);
    const auto& cj = cg.region(j);
    if (ri.span == 0 && cj.span == 0) {
      out.push_back({t.rows().atom_at(rg.atom_index(i)), t.cols().atom_at(cg.atom_index(j))});
      return;
    }
    std::vector<int> moves;
    if (ri.span > 0) {
      moves.push_back(0);
      if (!ri.time.empty()) moves.push_back(1);
    }
    if (cj.span > 0) {
      moves.push_back(2);
      if (!cj.time.empty()) moves.push_back(3);
    }
    const int mv = moves[std::uniform_int_distribution<std::size_t>(0, moves.size() - 1)(rng)];
    switch (mv) {
      case 0: walk(ri.freq[0], j); walk(ri.freq[1], j); break;
      case 1: for (Index c : ri.time) walk(c, j); break;
      case 2: walk(i, cj.freq[0]); walk(i, cj.freq[1]); break;
      default: for (Index c : cj.time) walk(i, c); break;
    }
  };
  walk(rg.root(), cg.root());
  return out;
}

// Root scaling atom plus the first difference atom of every split folder.
inline std::vector<AtomId> haar_atoms(const GhwtLayout& lay) {
  std::vector<AtomId> out{{0, 0, 0}};
  const PartitionTree& t = lay.tree();
  for (Index l = 0; l < t.depth(); ++l)
    for (Index k = 0; k < static_cast<Index>(t.levels[static_cast<std::size_t>(l)].size()); ++k)
      if (t.folder(l, k).children.size() >= 2) out.push_back({l, k, 1});
  return out;
}

inline std::vector<Tile> haar_tiling(const TensorGhwt& t) {
  std::vector<Tile> out;
  for (const AtomId& r : haar_atoms(t.rows()))
    for (const AtomId& c : haar_atoms(t.cols())) out.push_back({r, c});
  return out;
}

// Atoms of a uniform dyadic tree with 2^depth leaves, each with its dyadic
// time/frequency rectangle in a leaves x leaves grid: level j, folder k and
// sequency t cover time [k N/2^j, (k+1) N/2^j) and frequency [t 2^j, (t+1) 2^j).
struct DyadicAtom {
  AtomId id;
  Index t0, t1, f0, f1;
};

inline std::vector<DyadicAtom> dyadic_atoms(Index leaves) {
  std::vector<DyadicAtom> out;
  for (Index j = 0, folders = 1; folders <= leaves; ++j, folders *= 2) {
    const Index width = leaves / folders;
    for (Index k = 0; k < folders; ++k)
      for (Index t = 0; t < width; ++t) out.push_back({{j, k, t}, k * width, (k + 1) * width, t * folders, (t + 1) * folders});
  }
  return out;
}

// Minimum of sum |c|^ell over all exact covers of the 1-D plane (N <= 16).
inline double brute_force_1d(Index leaves, const std::function<double(const AtomId&)>& cost) {
  const auto atoms = dyadic_atoms(leaves);
  using Cells = std::bitset<256>;
  std::vector<Cells> mask(atoms.size());
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (Index x = atoms[a].t0; x < atoms[a].t1; ++x)
      for (Index y = atoms[a].f0; y < atoms[a].f1; ++y) mask[a].set(static_cast<std::size_t>(x * leaves + y));
  const auto total = static_cast<std::size_t>(leaves * leaves);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Cells, double)> go = [&](Cells used, double acc) {
    std::size_t cell = 0;
    while (cell < total && used.test(cell)) ++cell;
    if (cell == total) {
      best = std::min(best, acc);
      return;
    }
    for (std::size_t a = 0; a < atoms.size(); ++a)
      if (mask[a].test(cell) && (mask[a] & used).none()) go(used | mask[a], acc + cost(atoms[a].id));
  };
  go(Cells{}, 0.0);
  return best;
}

struct CoverResult {
  double best = std::numeric_limits<double>::infinity();
  std::size_t tilings = 0;
};

// Every distinct tiling of a 4 x 4 tensor problem reachable by recursive
// halving of dyadic rectangles, one axis at a time. Regions are tracked
// geometrically (time and frequency intervals per axis), independent of
// RegionGraph. Tilings are deduplicated since different cut orders can land
// on the same tile set.
inline CoverResult brute_force_2d(Index leaves, const std::function<double(const AtomId&, const AtomId&)>& cost) {
  require(leaves <= 4, "brute_force_2d: plane too large");
  struct Rect {
    Index t0, t1, f0, f1;
  };
  const auto atoms = dyadic_atoms(leaves);
  auto atom_of = [&](const Rect& r) -> int {
    for (std::size_t a = 0; a < atoms.size(); ++a)
      if (atoms[a].t0 == r.t0 && atoms[a].t1 == r.t1 && atoms[a].f0 == r.f0 && atoms[a].f1 == r.f1) return static_cast<int>(a);
    return -1;
  };
  auto halves = [&](const Rect& r, bool time) -> std::vector<Rect> {
    if ((r.t1 - r.t0) * (r.f1 - r.f0) <= leaves) return {};
    if (time) {
      if (r.t1 - r.t0 < 2) return {};
      const Index m = (r.t0 + r.t1) / 2;
      return {{r.t0, m, r.f0, r.f1}, {m, r.t1, r.f0, r.f1}};
    }
    if (r.f1 - r.f0 < 2) return {};
    const Index m = (r.f0 + r.f1) / 2;
    return {{r.t0, r.t1, r.f0, m}, {r.t0, r.t1, m, r.f1}};
  };
  using Tiling = std::vector<std::pair<int, int>>;
  std::function<std::set<Tiling>(const Rect&, const Rect&)> all = [&](const Rect& a, const Rect& b) {
    std::set<Tiling> out;
    const int ia = atom_of(a), ib = atom_of(b);
    if (ia >= 0 && ib >= 0) out.insert(Tiling{{ia, ib}});
    for (int axis = 0; axis < 2; ++axis)
      for (bool time : {false, true}) {
        const auto parts = halves(axis == 0 ? a : b, time);
        if (parts.empty()) continue;
        const auto lo = axis == 0 ? all(parts[0], b) : all(a, parts[0]);
        const auto hi = axis == 0 ? all(parts[1], b) : all(a, parts[1]);
        for (const auto& x : lo)
          for (const auto& y : hi) {
            Tiling t = x;
            t.insert(t.end(), y.begin(), y.end());
            std::sort(t.begin(), t.end());
            out.insert(std::move(t));
          }
      }
    return out;
  };
  const Rect whole{0, leaves, 0, leaves};
  const auto tilings = all(whole, whole);
  CoverResult out;
  out.tilings = tilings.size();
  for (const auto& t : tilings) {
    double c = 0;
    for (const auto& [r, k] : t) c += cost(atoms[static_cast<std::size_t>(r)].id, atoms[static_cast<std::size_t>(k)].id);
    out.best = std::min(out.best, c);
  }
  return out;
}

}  // namespace eows::testing
