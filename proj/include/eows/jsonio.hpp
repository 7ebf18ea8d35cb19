#pragma once

// JSON forms of trees, coefficient maps and the denoise diagnostics.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "pipeline.hpp"

namespace eows {

using nlohmann::json;

inline json tree_to_json(const PartitionTree& t) {
  json levels = json::array();
  for (Index l = 0; l < t.depth(); ++l) {
    json level = json::array();
    for (Index k = 0; k < static_cast<Index>(t.levels[static_cast<std::size_t>(l)].size()); ++k) {
      const auto m = t.members(l, k);
      level.push_back({{"id", k}, {"parent", t.folder(l, k).parent}, {"members", std::vector<Index>(m.begin(), m.end())}});
    }
    levels.push_back(std::move(level));
  }
  return {{"levels", levels}, {"leaf_order", t.leaf_order}};
}

// Folder offsets are recovered from the position of the members inside
// leaf_order; children lists are rebuilt from the parent links.
inline PartitionTree tree_from_json(const json& j) {
  try {
    require(j.is_object() && j.contains("levels") && j.contains("leaf_order"), "tree json: needs levels and leaf_order");
    PartitionTree t;
    t.leaf_order = j.at("leaf_order").get<std::vector<Index>>();
    const Index n = t.leaves();
    std::vector<Index> pos(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
      const Index v = t.leaf_order[static_cast<std::size_t>(i)];
      require(v >= 0 && v < n && pos[static_cast<std::size_t>(v)] < 0, "tree json: leaf_order is not a permutation");
      pos[static_cast<std::size_t>(v)] = i;
    }
    for (const auto& jl : j.at("levels")) {
      std::vector<Folder> level;
      Index expect_id = 0;
      for (const auto& jf : jl) {
        require(jf.at("id").get<Index>() == expect_id++, "tree json: folder ids must count up from 0");
        const auto members = jf.at("members").get<std::vector<Index>>();
        require(!members.empty(), "tree json: empty folder");
        Folder f;
        f.parent = jf.at("parent").get<Index>();
        f.size = static_cast<Index>(members.size());
        for (Index v : members) require(v >= 0 && v < n, "tree json: member out of range");
        f.offset = pos[static_cast<std::size_t>(members.front())];
        for (std::size_t i = 0; i < members.size(); ++i)
          require(pos[static_cast<std::size_t>(members[i])] == f.offset + static_cast<Index>(i),
                  "tree json: folder members must be a contiguous run of leaf_order");
        level.push_back(std::move(f));
      }
      t.levels.push_back(std::move(level));
    }
    for (std::size_t l = 1; l < t.levels.size(); ++l)
      for (std::size_t k = 0; k < t.levels[l].size(); ++k) {
        const Index p = t.levels[l][k].parent;
        require(p >= 0 && p < static_cast<Index>(t.levels[l - 1].size()), "tree json: bad parent");
        t.levels[l - 1][static_cast<std::size_t>(p)].children.push_back(static_cast<Index>(k));
      }
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw InputError(std::string("tree json: ") + e.what());
  }
}

inline json atom_to_json(const AtomId& a) { return {{"level", a.level}, {"folder", a.folder}, {"tag", a.tag}}; }

inline AtomId atom_from_json(const json& j) {
  return {j.at("level").get<Index>(), j.at("folder").get<Index>(), j.at("tag").get<Index>()};
}

inline json coeffs_to_json(const CoeffMap& c) {
  json tiles = json::array();
  for (std::size_t i = 0; i < c.tiles.size(); ++i)
    tiles.push_back({{"row_atom", atom_to_json(c.tiles[i].row)}, {"col_atom", atom_to_json(c.tiles[i].col)}, {"value", c.values[i]}});
  return {{"tiles", tiles}};
}

inline CoeffMap coeffs_from_json(const json& j) {
  try {
    CoeffMap c;
    for (const auto& jt : j.at("tiles")) {
      c.tiles.push_back({atom_from_json(jt.at("row_atom")), atom_from_json(jt.at("col_atom"))});
      c.values.push_back(jt.at("value").get<double>());
    }
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("coefficient json: ") + e.what());
  }
}

inline json spikes_to_json(const SpikeEstimates& est, const std::vector<double>& phi = {}) {
  json spikes = json::array();
  for (std::size_t i = 0; i < est.spikes.size(); ++i) {
    const Spike& s = est.spikes[i];
    json js{{"lambda", s.lambda}, {"d_hat", s.d_hat}, {"a1", s.a1_hat}, {"a2", s.a2_hat}};
    if (i < phi.size()) js["phi"] = phi[i];
    spikes.push_back(std::move(js));
  }
  return {{"r_hat", est.r_hat},
          {"lambda_plus_hat", est.lambda_plus_hat},
          {"k", est.k},
          {"c", est.c_exp},
          {"spikes", spikes},
          {"diagnostics", est.diagnostics}};
}

inline json summary_stats(std::vector<double> v) {
  if (v.empty()) return json::object();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  const double med = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return {{"min", v.front()}, {"median", med}, {"max", v.back()}};
}

inline json result_to_json(const EowsResult& r) {
  json j = spikes_to_json(r.est, r.phi);
  j["notes"] = r.notes;
  j["degraded"] = r.degraded;
  j["seconds"] = r.seconds;
  if (!r.basis.tiles.empty()) {
    j["basis"] = {{"tiles", r.basis.tiles.size()}, {"cost", r.basis.cost}, {"family", family_name(r.basis.family)}};
  }
  if (!r.sigma_hat.empty()) {
    j["tau_star"] = r.tau_star;
    j["quantile"] = r.quantile;
    j["sigma_hat"] = summary_stats(r.sigma_hat);
  }
  if (!r.row_balance.empty()) j["row_balance"] = summary_stats(r.row_balance);
  if (!r.col_balance.empty()) j["col_balance"] = summary_stats(r.col_balance);
  return j;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "': file not found or unreadable");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace eows
