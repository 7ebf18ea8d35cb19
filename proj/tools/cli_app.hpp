#pragma once

// The eows command line. run_cli takes the arguments after the program name
// so tests can drive it in-process.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "eows/jsonio.hpp"
#include "eows/matio.hpp"
#include "eows/simlab.hpp"

namespace eows::cli {

inline std::vector<Index> parse_sizes(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && v >= 2, "bad size '" + item + "' in list '" + s + "'");
    out.push_back(static_cast<Index>(v));
  }
  require(!out.empty(), "empty size list");
  return out;
}

inline std::vector<std::string> parse_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  require(!out.empty(), "empty method list");
  return out;
}

inline std::string sidecar_for(const std::string& path, const std::string& ext) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
  return path.substr(0, dot) + ext;
}

struct EmdFlags {
  double a = 0.0, b = 1.0, eps = 1.0;
  void attach(CLI::App* app) {
    app->add_option("--emd-a", a, "tree EMD level decay exponent")->capture_default_str();
    app->add_option("--emd-b", b, "tree EMD folder size exponent")->capture_default_str();
    app->add_option("--emd-eps", eps, "dual affinity bandwidth multiplier on the median EMD")->capture_default_str()->check(CLI::PositiveNumber);
  }
  [[nodiscard]] EmdParams params() const { return {a, b, eps}; }
};

struct HelixFlags {
  HelixGeometry g;
  void attach(CLI::App* app) {
    app->add_option("--helix-radius", g.radius, "helix radius")->capture_default_str();
    app->add_option("--helix-pitch", g.pitch, "helix rise per turn")->capture_default_str();
    app->add_option("--helix-turns", g.turns, "helix turns")->capture_default_str();
    app->add_option("--sheet-x", g.sheet_x, "plane of the target sheet")->capture_default_str();
    app->add_option("--sheet-y0", g.sheet_y0, "sheet lower y")->capture_default_str();
    app->add_option("--sheet-y1", g.sheet_y1, "sheet upper y")->capture_default_str();
    app->add_option("--sheet-z0", g.sheet_z0, "sheet lower z")->capture_default_str();
    app->add_option("--sheet-z1", g.sheet_z1, "sheet upper z")->capture_default_str();
  }
};

inline QuestionnaireStart parse_start(const std::string& s) {
  return s == "rows" ? QuestionnaireStart::Rows : QuestionnaireStart::Columns;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Low-rank matrix denoising with spectral shrinkage and tree wavelets", "eows"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic signal, optionally with noise");
  std::string g_signal = "sinusoid", g_noise = "none", g_out, g_clean_out;
  Index g_n = 64, g_p = 0;
  std::uint64_t g_seed = 0;
  double g_df = 10.0, g_nu = 1.0, g_frob2 = 150.0;
  HelixFlags g_helix;
  gen->add_option("--signal", g_signal, "helmholtz or sinusoid")->check(CLI::IsMember({"helmholtz", "sinusoid"}))->capture_default_str();
  gen->add_option("--noise", g_noise, "none, type1, type2 or type3")->check(CLI::IsMember({"none", "type1", "type2", "type3"}))->capture_default_str();
  gen->add_option("--n", g_n, "size (sinusoid: n x 2n, helmholtz: p x n)")->capture_default_str();
  gen->add_option("--p", g_p, "helmholtz rows (default n)");
  gen->add_option("--seed", g_seed, "64-bit seed")->capture_default_str();
  gen->add_option("--df", g_df, "Student-t degrees of freedom")->capture_default_str();
  gen->add_option("--nu", g_nu, "helmholtz wave number")->capture_default_str();
  gen->add_option("--frob2", g_frob2, "helmholtz squared Frobenius norm")->capture_default_str();
  gen->add_option("--out", g_out, "output matrix (.eows binary, otherwise text)")->required();
  gen->add_option("--clean-out", g_clean_out, "also write the noise-free signal here");
  g_helix.attach(gen);

  // denoise
  auto* den = app.add_subcommand("denoise", "denoise a matrix file");
  std::string d_in, d_out, d_sidecar, d_method = "eows", d_loss = "fro", d_tree_source = "os", d_start = "columns";
  double d_ell = 1.0, d_sigma = 1.0, d_c = 0.0;
  int d_iters = 3;
  std::size_t d_budget = TensorGhwt::kDefaultExactBudget;
  EmdFlags d_emd;
  den->add_option("--in", d_in, "input matrix")->required();
  den->add_option("--out", d_out, "output matrix (.eows binary, otherwise text)");
  den->add_option("--sidecar", d_sidecar, "diagnostics JSON (default: output path with .json)");
  den->add_option("--method", d_method, "eoptshrink, ws or eows")->check(CLI::IsMember({"eoptshrink", "ws", "eows"}))->capture_default_str();
  den->add_option("--loss", d_loss, "shrinker loss: fro, op or nuc")->check(CLI::IsMember({"fro", "op", "nuc"}))->capture_default_str();
  auto* o_ts = den->add_option("--tree-source", d_tree_source, "matrix the trees are learned on: os or amp (eows only)")
                   ->check(CLI::IsMember({"os", "amp"}))->capture_default_str();
  auto* o_ell = den->add_option("--ell", d_ell, "best-basis cost exponent in (0, 2)")->capture_default_str();
  auto* o_iters = den->add_option("--iters", d_iters, "questionnaire iterations")->capture_default_str();
  auto* o_sigma = den->add_option("--sigma", d_sigma, "noise level for the ws threshold (ws only)")->capture_default_str()->check(CLI::PositiveNumber);
  auto* o_c = den->add_option("--c", d_c, "bulk window exponent (default min(1/2.01, 1/log log n))");
  auto* o_start = den->add_option("--start", d_start, "first questionnaire tree: columns or rows")->check(CLI::IsMember({"columns", "rows"}))->capture_default_str();
  auto* o_budget = den->add_option("--exact-budget", d_budget, "largest region product searched exactly")->capture_default_str();
  d_emd.attach(den);

  // transform
  auto* tra = app.add_subcommand("transform", "best-basis tensor transform of a matrix on given trees");
  std::string t_in, t_rows, t_cols, t_out;
  double t_ell = 1.0;
  std::size_t t_budget = TensorGhwt::kDefaultExactBudget;
  tra->add_option("--in", t_in, "input matrix")->required();
  tra->add_option("--row-tree", t_rows, "row tree JSON")->required();
  tra->add_option("--col-tree", t_cols, "column tree JSON")->required();
  tra->add_option("--ell", t_ell, "best-basis cost exponent in (0, 2)")->capture_default_str();
  tra->add_option("--exact-budget", t_budget, "largest region product searched exactly")->capture_default_str();
  tra->add_option("--out", t_out, "coefficient JSON")->required();

  // tree
  auto* tre = app.add_subcommand("tree", "learn row and column trees of a matrix");
  std::string r_in, r_axis = "rows", r_out, r_start = "columns";
  int r_iters = 3;
  EmdFlags r_emd;
  tre->add_option("--in", r_in, "input matrix")->required();
  tre->add_option("--axis", r_axis, "rows, cols or both")->check(CLI::IsMember({"rows", "cols", "both"}))->capture_default_str();
  tre->add_option("--iters", r_iters, "questionnaire iterations")->capture_default_str();
  tre->add_option("--start", r_start, "first questionnaire tree: columns or rows")->check(CLI::IsMember({"columns", "rows"}))->capture_default_str();
  tre->add_option("--out", r_out, "tree JSON (stdout when omitted)");
  r_emd.attach(tre);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a synthetic experiment");
  std::string s_signal = "sinusoid", s_noise = "type1", s_n = "256,512", s_methods = "eoptshrink,ws,eows", s_out, s_json,
              s_loss = "fro", s_tree_source = "os";
  int s_trials = 10, s_iters = 3;
  std::uint64_t s_seed = 0;
  double s_df = 10.0, s_nu = 1.0, s_frob2 = 150.0, s_ell = 1.0, s_sigma = 1.0;
  HelixFlags s_helix;
  EmdFlags s_emd;
  sim->add_option("--signal", s_signal, "helmholtz or sinusoid")->check(CLI::IsMember({"helmholtz", "sinusoid"}))->capture_default_str();
  sim->add_option("--noise", s_noise, "type1, type2 or type3")->check(CLI::IsMember({"type1", "type2", "type3"}))->capture_default_str();
  sim->add_option("--n", s_n, "comma-separated sizes")->capture_default_str();
  sim->add_option("--trials", s_trials, "trials per size")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--methods", s_methods, "comma-separated: eoptshrink, ws, eows, noisy")->capture_default_str();
  sim->add_option("--out", s_out, "per-trial CSV")->required();
  sim->add_option("--json", s_json, "aggregate JSON (default: CSV path with .json)");
  sim->add_option("--seed", s_seed, "64-bit seed")->capture_default_str();
  sim->add_option("--df", s_df, "Student-t degrees of freedom")->capture_default_str();
  sim->add_option("--nu", s_nu, "helmholtz wave number")->capture_default_str();
  sim->add_option("--frob2", s_frob2, "helmholtz squared Frobenius norm")->capture_default_str();
  sim->add_option("--loss", s_loss, "shrinker loss: fro, op or nuc")->check(CLI::IsMember({"fro", "op", "nuc"}))->capture_default_str();
  sim->add_option("--tree-source", s_tree_source, "os or amp")->check(CLI::IsMember({"os", "amp"}))->capture_default_str();
  sim->add_option("--ell", s_ell, "best-basis cost exponent")->capture_default_str();
  sim->add_option("--iters", s_iters, "questionnaire iterations")->capture_default_str();
  sim->add_option("--sigma", s_sigma, "noise level for the ws baseline")->capture_default_str()->check(CLI::PositiveNumber);
  s_helix.attach(sim);
  s_emd.attach(sim);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*gen) {
      const SignalSpec spec{parse_signal(g_signal), g_nu, g_frob2, g_helix.g};
      const Signal sig = spec.kind == SignalKind::Helmholtz
                             ? gen_helmholtz(g_p > 0 ? g_p : g_n, g_n, g_nu, g_frob2, derive_seed(g_seed, "signal"), g_helix.g)
                             : gen_sinusoid(g_n, derive_seed(g_seed, "signal"));
      Mat m = sig.s;
      if (g_noise != "none") m += gen_noise(m.rows(), m.cols(), {parse_noise(g_noise), g_df, derive_seed(g_seed, "noise")});
      write_matrix(g_out, m);
      if (!g_clean_out.empty()) write_matrix(g_clean_out, sig.s);
      return 0;
    }
    if (*den) {
      const Method method = parse_method(d_method);
      require(method == Method::WS || o_sigma->count() == 0, "--sigma applies to --method ws only");
      require(method == Method::Eows || o_ts->count() == 0, "--tree-source applies to --method eows only");
      require(method != Method::EOptShrink || (o_ell->count() == 0 && o_iters->count() == 0 && o_start->count() == 0 && o_budget->count() == 0),
              "--ell, --iters, --start and --exact-budget do not apply to --method eoptshrink");
      require(method != Method::WS || o_c->count() == 0, "--c does not apply to --method ws");
      require(d_ell > 0 && d_ell < 2, "--ell must lie in (0, 2)");
      require(d_iters >= 1, "--iters must be >= 1");
      const Mat y = read_matrix(d_in);
      EowsConfig cfg;
      cfg.method = method;
      cfg.loss = parse_target(d_loss);
      if (o_c->count()) cfg.c_exp = d_c;
      cfg.emd = d_emd.params();
      cfg.iters = d_iters;
      cfg.ell = d_ell;
      cfg.tree_source = d_tree_source == "amp" ? TreeSource::Amp : TreeSource::OS;
      cfg.start = parse_start(d_start);
      cfg.ws_sigma = d_sigma;
      cfg.exact_budget = d_budget;
      const EowsResult res = run(y, cfg);
      json side = result_to_json(res);
      side["method"] = d_method;
      side["loss"] = d_loss;
      if (!d_out.empty()) write_matrix(d_out, res.s_hat);
      const std::string side_path = !d_sidecar.empty() ? d_sidecar : (!d_out.empty() ? sidecar_for(d_out, ".json") : "");
      if (side_path.empty())
        out << side.dump(2) << '\n';
      else
        write_json(side_path, side);
      for (const auto& note : res.notes) err << "note: " << note << '\n';
      return 0;
    }
    if (*tra) {
      require(t_ell > 0 && t_ell < 2, "--ell must lie in (0, 2)");
      const Mat m = read_matrix(t_in);
      const PartitionTree rows = tree_from_json(read_json(t_rows));
      const PartitionTree cols = tree_from_json(read_json(t_cols));
      require(rows.leaves() == m.rows() && cols.leaves() == m.cols(), "tree sizes do not match the matrix shape");
      const TensorGhwt tensor(rows, cols);
      const BestBasis2D basis = tensor.best_basis(m, t_ell, t_budget);
      json j = coeffs_to_json(tensor.transform(m, basis.tiles));
      j["ell"] = t_ell;
      j["cost"] = basis.cost;
      j["family"] = family_name(basis.family);
      write_json(t_out, j);
      return 0;
    }
    if (*tre) {
      require(r_iters >= 1, "--iters must be >= 1");
      const Mat m = read_matrix(r_in);
      std::vector<std::string> notes;
      const TreePair trees = questionnaire(m, r_iters, r_emd.params(), parse_start(r_start), &notes);
      json j = r_axis == "rows" ? tree_to_json(trees.rows)
               : r_axis == "cols" ? tree_to_json(trees.cols)
                                  : json{{"rows", tree_to_json(trees.rows)}, {"cols", tree_to_json(trees.cols)}};
      if (r_out.empty())
        out << j.dump(2) << '\n';
      else
        write_json(r_out, j);
      for (const auto& note : notes) err << "note: " << note << '\n';
      return 0;
    }
    if (*sim) {
      ExperimentSpec spec;
      spec.signal = {parse_signal(s_signal), s_nu, s_frob2, s_helix.g};
      spec.noise = {parse_noise(s_noise), s_df, s_seed};
      spec.n_grid = parse_sizes(s_n);
      spec.trials = s_trials;
      spec.methods = parse_names(s_methods);
      spec.base.loss = parse_target(s_loss);
      spec.base.ell = s_ell;
      spec.base.iters = s_iters;
      spec.base.tree_source = s_tree_source == "amp" ? TreeSource::Amp : TreeSource::OS;
      spec.base.ws_sigma = s_sigma;
      spec.base.emd = s_emd.params();
      const ExperimentTable table = run_experiment(spec);
      std::ofstream csv(s_out);
      if (!csv) throw InputError("cannot write '" + s_out + "'");
      write_csv(csv, table);
      write_json(s_json.empty() ? sidecar_for(s_out, ".json") : s_json, aggregate_json(table, spec));
      for (const auto& r : table.rows)
        if (!r.error.empty()) err << "trial failed: n=" << r.n << " method=" << r.method << " trial=" << r.trial << ": " << r.error << '\n';
      return 0;
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace eows::cli
