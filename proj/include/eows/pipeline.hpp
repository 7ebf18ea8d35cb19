#pragma once

// End-to-end denoising: spectral shrinkage, tree learning on the shrunk
// matrix, best-basis wavelet shrinkage of the amplitude-corrected matrix, and
// recombination of the cleaned singular vectors with the estimated values.

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "hwt.hpp"
#include "shrinkage.hpp"
#include "spectre.hpp"
#include "treegeo.hpp"

namespace eows {

enum class Method { EOptShrink, WS, Eows };
enum class TreeSource { OS, Amp };

inline Method parse_method(const std::string& s) {
  if (s == "eoptshrink") return Method::EOptShrink;
  if (s == "ws") return Method::WS;
  if (s == "eows") return Method::Eows;
  throw InputError("unknown method '" + s + "' (expected eoptshrink, ws or eows)");
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::EOptShrink: return "eoptshrink";
    case Method::WS: return "ws";
    case Method::Eows: return "eows";
  }
  return "?";
}

struct EowsConfig {
  Method method = Method::Eows;
  ShrinkTarget loss = ShrinkTarget::Frobenius;
  std::optional<double> c_exp;  // default: min(1/2.01, 1/log log n)
  EmdParams emd;
  int iters = 3;
  double ell = 1.0;
  TreeSource tree_source = TreeSource::OS;
  QuestionnaireStart start = QuestionnaireStart::Columns;
  double ws_sigma = 1.0;  // noise level for the classical baseline
  std::size_t exact_budget = TensorGhwt::kDefaultExactBudget;
};

struct EowsResult {
  Mat s_hat;
  SpikeEstimates est;
  std::vector<double> phi;  // shrunk singular values
  std::optional<TreePair> trees;
  BestBasis2D basis;
  double tau_star = 0.0;
  double quantile = 0.0;
  std::vector<double> sigma_hat;  // per tile, same order as basis.tiles
  std::map<std::string, double> seconds;
  std::vector<double> row_balance, col_balance;
  std::vector<std::string> notes;
  bool degraded = false;
};

namespace detail {

template <class F>
auto labelled_step(const std::string& label, std::map<std::string, double>& seconds, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    seconds[label] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto r = body();
      finish();
      return r;
    }
  } catch (const InputError& e) {
    throw InputError("step " + label + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("step " + label + ": " + e.what());
  }
}

// Top-k singular triplets through the smaller Gram matrix.
inline SvdTriplet top_triplets(const Mat& m, Index k) {
  if (m.rows() <= m.cols()) return GramSpectrum(m).top(k);
  const Mat mt = m.transpose();
  SvdTriplet t = GramSpectrum(mt).top(k);
  SvdTriplet out{t.V, t.sigma, t.U};
  fix_signs(out.U, out.V);
  return out;
}

}  // namespace detail

inline EowsResult run(const Mat& y, const EowsConfig& cfg) {
  require_finite(y, "run");
  require(std::min(y.rows(), y.cols()) >= 2, "run: matrix too small");
  EowsResult res;
  auto& sec = res.seconds;

  if (cfg.method == Method::WS) {
    res.trees = detail::labelled_step("(iv) questionnaire", sec, [&] {
      return questionnaire(y, cfg.iters, cfg.emd, cfg.start, &res.notes);
    });
    const TensorGhwt tensor(res.trees->rows, res.trees->cols);
    res.s_hat = detail::labelled_step("ws", sec, [&] { return classic_ws(y, tensor, cfg.ws_sigma, cfg.ell, &res.basis); });
    res.row_balance = balance_ratios(res.trees->rows);
    res.col_balance = balance_ratios(res.trees->cols);
    return res;
  }

  const EoptResult eopt = detail::labelled_step("(i)-(iii) eoptshrink", sec, [&] { return eoptshrink(y, cfg.loss, cfg.c_exp); });
  res.est = eopt.est;
  res.phi = eopt.phi;
  res.notes.insert(res.notes.end(), eopt.est.diagnostics.begin(), eopt.est.diagnostics.end());
  const Index r = res.est.r_hat;
  if (cfg.method == Method::EOptShrink) {
    res.s_hat = eopt.s_os;
    if (r == 0) res.notes.push_back("no signal detected");
    return res;
  }
  if (r == 0) {
    res.s_hat = Mat::Zero(y.rows(), y.cols());
    res.notes.push_back("no signal detected");
    return res;
  }
  const Index room = std::min(y.rows(), y.cols()) - 2 * res.est.k;
  if (r >= room) {
    res.s_hat = eopt.s_os;
    res.degraded = true;
    res.notes.push_back("effective rank leaves no room for the bulk; returning the spectral estimate only");
    return res;
  }

  const Mat& tree_source = cfg.tree_source == TreeSource::OS ? eopt.s_os : eopt.s_amp;
  res.trees = detail::labelled_step("(iv) questionnaire", sec, [&] {
    return questionnaire(tree_source, cfg.iters, cfg.emd, cfg.start, &res.notes);
  });
  res.row_balance = balance_ratios(res.trees->rows);
  res.col_balance = balance_ratios(res.trees->cols);
  const TensorGhwt tensor(res.trees->rows, res.trees->cols);

  CoeffMap coeffs = detail::labelled_step("(v) best basis", sec, [&] {
    res.basis = tensor.best_basis(eopt.s_amp, cfg.ell, cfg.exact_budget);
    return tensor.transform(eopt.s_amp, res.basis.tiles);
  });

  std::vector<double> variance = detail::labelled_step("(vi) variance", sec, [&] {
    const VarTable vt(eopt.z_hat, tensor, res.est);
    std::vector<double> v(coeffs.tiles.size());
    parallel_for(v.size(), [&](std::size_t i) {
      v[i] = vt.variance(tensor.rows().index_of(coeffs.tiles[i].row), tensor.cols().index_of(coeffs.tiles[i].col));
    });
    return v;
  });
  res.sigma_hat.resize(variance.size());
  for (std::size_t i = 0; i < variance.size(); ++i) res.sigma_hat[i] = std::sqrt(variance[i]);

  res.tau_star = detail::labelled_step("(vii) threshold", sec, [&] { return tau_star(eopt.z_hat, &res.quantile); });

  res.s_hat = detail::labelled_step("(viii) shrink and recombine", sec, [&] {
    const CoeffMap shrunk = adaptive_shrink(coeffs, variance, res.tau_star);
    const Mat cleaned = tensor.inverse(shrunk);
    const SvdTriplet t = detail::top_triplets(cleaned, r);
    Index keep = 0;
    const double floor = 1e-10 * std::max(1.0, t.sigma.size() ? t.sigma(0) : 0.0);
    while (keep < t.sigma.size() && t.sigma(keep) > floor) ++keep;
    if (keep < r)
      res.notes.push_back("cleaned matrix has rank " + std::to_string(keep) + " < " + std::to_string(r) +
                          "; missing singular values set to zero");
    Mat out = Mat::Zero(y.rows(), y.cols());
    for (Index i = 0; i < keep; ++i)
      out += res.est.spikes[static_cast<std::size_t>(i)].d_hat * t.U.col(i) * t.V.col(i).transpose();
    return out;
  });
  return res;
}

}  // namespace eows
