#pragma once

// Data-driven spiked-model estimation: bulk edge, effective rank, imputed
// bulk, Stieltjes transforms, and the loss-specific optimal shrinkers.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "matcore.hpp"

namespace eows {

struct SpectrumView {
  Vec eigs;  // descending, >= 0; length p (p <= n after orientation)
  Index p = 0;
  Index n = 0;

  [[nodiscard]] double beta() const { return static_cast<double>(p) / static_cast<double>(n); }
  // 1-based access to match the usual eigenvalue indexing; zero beyond the stored tail.
  [[nodiscard]] double at(Index i) const { return i - 1 < eigs.size() ? eigs(i - 1) : 0.0; }
};

enum class ShrinkTarget { Frobenius, Operator, Nuclear };

struct Spike {
  double lambda = 0;  // sample eigenvalue
  double m1 = 0, m2 = 0, m1p = 0, m2p = 0;
  double t_hat = 0, tp_hat = 0;
  double d_hat = 0, a1_hat = 0, a2_hat = 0;
};

struct SpikeEstimates {
  Index r_hat = 0;
  double lambda_plus_hat = 0;
  double c_exp = 0;
  Index k = 0;  // floor(n^c)
  std::vector<Spike> spikes;
  std::vector<double> imputed;
  std::vector<std::string> diagnostics;
};

struct StieltjesValues {
  double m1, m2, m1p, m2p;
};

inline double default_c(Index n) {
  const double ll = std::log(std::log(static_cast<double>(n)));
  return ll > 0 ? std::min(1.0 / 2.01, 1.0 / ll) : 1.0 / 2.01;
}

inline Index edge_window(Index n, double c) {
  return static_cast<Index>(std::floor(std::pow(static_cast<double>(n), c)));
}

inline SpectrumView make_spectrum(Vec eigs, Index p, Index n) {
  require(p >= 1 && n >= 1, "spectrum: empty shape");
  require(eigs.size() >= 1, "spectrum: no eigenvalues");
  for (Index i = 1; i < eigs.size(); ++i)
    require(eigs(i) <= eigs(i - 1), "spectrum: eigenvalues must be descending");
  require(eigs.minCoeff() >= 0.0 && eigs.allFinite(), "spectrum: eigenvalues must be finite and >= 0");
  return SpectrumView{std::move(eigs), p, n};
}

namespace detail {
inline const double kEdgeScale = 1.0 / (std::pow(2.0, 2.0 / 3.0) - 1.0);
}

inline double bulk_edge(const SpectrumView& spec, double c) {
  require(c > 0 && c < 0.5 + 1e-12, "bulk_edge: c must lie in (0, 1/2]");
  const Index k = edge_window(spec.n, c);
  require(k >= 1 && 2 * k + 1 <= std::min(spec.p, spec.n),
          "bulk_edge: matrix too small for edge window " + std::to_string(k));
  const double top = spec.at(k + 1);
  return top + (top - spec.at(2 * k + 1)) * detail::kEdgeScale;
}

inline Index effective_rank(const SpectrumView& spec, double lambda_plus_hat) {
  require(std::isfinite(lambda_plus_hat), "effective_rank: non-finite edge");
  const double cut = lambda_plus_hat + std::pow(static_cast<double>(spec.n), -1.0 / 3.0);
  Index r = 0;
  for (Index i = 0; i < spec.eigs.size(); ++i)
    if (spec.eigs(i) > cut) ++r;
  return r;
}

// Bulk model after removing r spikes: k interpolated points near the edge
// followed by the observed eigenvalues r+k+1 .. p, each with mass 1/(p-r).
struct BulkModel {
  std::vector<double> imputed;
  std::vector<double> points;  // imputed then observed tail, all with equal mass

  [[nodiscard]] double cdf(double x) const {
    if (points.empty()) return x >= 0 ? 1.0 : 0.0;
    const auto below = std::count_if(points.begin(), points.end(), [x](double v) { return v <= x; });
    return static_cast<double>(below) / static_cast<double>(points.size());
  }
};

inline BulkModel impute_and_cdf(const SpectrumView& spec, Index r_hat, double c) {
  const Index k = edge_window(spec.n, c);
  require(k >= 1 && r_hat >= 0 && r_hat + 2 * k + 1 <= spec.p,
          "impute: need r + 2k + 1 <= p (r=" + std::to_string(r_hat) + ", k=" + std::to_string(k) + ")");
  BulkModel out;
  const double anchor = spec.at(k + r_hat + 1);
  const double gap = anchor - spec.at(2 * k + r_hat + 1);
  for (Index j = r_hat + 1; j <= r_hat + k; ++j) {
    const double frac = static_cast<double>(j - r_hat - 1) / static_cast<double>(k);
    out.imputed.push_back(anchor + (1.0 - std::pow(frac, 2.0 / 3.0)) * detail::kEdgeScale * gap);
  }
  out.points = out.imputed;
  for (Index j = k + r_hat + 1; j <= spec.p; ++j) out.points.push_back(spec.at(j));
  return out;
}

inline StieltjesValues stieltjes_at(const BulkModel& bulk, double beta, double lam) {
  require(!bulk.points.empty(), "stieltjes: empty bulk");
  require(lam > 0, "stieltjes: evaluation point must be positive");
  double s1 = 0, s2 = 0;
  for (double x : bulk.points) {
    const double g = x - lam;
    if (std::abs(g) < 1e-12) throw NumericError("stieltjes: spike too close to the bulk");
    s1 += 1.0 / g;
    s2 += 1.0 / (g * g);
  }
  const double mass = static_cast<double>(bulk.points.size());
  StieltjesValues v{};
  v.m1 = s1 / mass;
  v.m1p = s2 / mass;
  // The n - p zero eigenvalues of the larger Gram matrix add (1 - beta)/(0 - lam).
  v.m2 = -(1.0 - beta) / lam + beta * v.m1;
  v.m2p = (1.0 - beta) / (lam * lam) + beta * v.m1p;
  return v;
}

inline Spike spike_from(const BulkModel& bulk, double beta, double lam) {
  const StieltjesValues s = stieltjes_at(bulk, beta, lam);
  Spike sp;
  sp.lambda = lam;
  sp.m1 = s.m1;
  sp.m2 = s.m2;
  sp.m1p = s.m1p;
  sp.m2p = s.m2p;
  sp.t_hat = lam * s.m1 * s.m2;
  sp.tp_hat = s.m1 * s.m2 + lam * (s.m1p * s.m2 + s.m1 * s.m2p);
  if (sp.t_hat > 0) {
    sp.d_hat = 1.0 / std::sqrt(sp.t_hat);
    const double denom = sp.d_hat * sp.d_hat * sp.tp_hat;
    sp.a1_hat = s.m1 / denom;
    sp.a2_hat = s.m2 / denom;
  }
  return sp;
}

inline bool spike_valid(const Spike& s) {
  return s.t_hat > 0 && std::isfinite(s.d_hat) && s.a1_hat > 0 && s.a1_hat < 1.5 &&
         s.a2_hat > 0 && s.a2_hat < 1.5;
}

// Spikes that fail validation are returned to the bulk: r is cut back to the
// first invalid index and the bulk model is rebuilt.
inline SpikeEstimates estimate_spikes(const SpectrumView& spec, std::optional<double> c_opt = {}) {
  SpikeEstimates est;
  est.c_exp = c_opt.value_or(default_c(spec.n));
  est.k = edge_window(spec.n, est.c_exp);
  est.lambda_plus_hat = bulk_edge(spec, est.c_exp);
  Index r = effective_rank(spec, est.lambda_plus_hat);
  const Index r_cap = spec.p - 2 * est.k - 1;
  if (r > r_cap) {
    est.diagnostics.push_back("effective rank " + std::to_string(r) + " capped at " +
                              std::to_string(r_cap) + " to leave room for the bulk");
    r = r_cap;
  }
  for (;;) {
    BulkModel bulk = impute_and_cdf(spec, r, est.c_exp);
    std::vector<Spike> spikes;
    Index first_bad = r;
    for (Index i = 0; i < r; ++i) {
      Spike s;
      try {
        s = spike_from(bulk, spec.beta(), spec.eigs(i));
      } catch (const NumericError&) {
        s = Spike{};
      }
      if (!spike_valid(s)) {
        first_bad = i;
        break;
      }
      s.a1_hat = std::clamp(s.a1_hat, 1e-8, 1.0);
      s.a2_hat = std::clamp(s.a2_hat, 1e-8, 1.0);
      spikes.push_back(s);
    }
    if (first_bad < r) {
      est.diagnostics.push_back("spike " + std::to_string(first_bad + 1) +
                                " failed validation; treated as bulk");
      r = first_bad;
      continue;
    }
    est.r_hat = r;
    est.spikes = std::move(spikes);
    est.imputed = std::move(bulk.imputed);
    return est;
  }
}

inline double amplitude_value(const Spike& s) { return s.d_hat / std::sqrt(s.a1_hat * s.a2_hat); }

inline double shrinker_value(const Spike& s, ShrinkTarget target) {
  const double a1 = s.a1_hat, a2 = s.a2_hat;
  switch (target) {
    case ShrinkTarget::Frobenius:
      return s.d_hat * std::sqrt(a1 * a2);
    case ShrinkTarget::Operator:
      return s.d_hat * std::sqrt(std::min(a1, a2) / std::max(a1, a2));
    case ShrinkTarget::Nuclear:
      return std::max(0.0, s.d_hat * (std::sqrt(a1 * a2) - std::sqrt((1 - a1) * (1 - a2))));
  }
  return 0.0;
}

inline std::vector<double> shrinker_values(const SpikeEstimates& est, ShrinkTarget target) {
  std::vector<double> out;
  out.reserve(est.spikes.size());
  for (const auto& s : est.spikes) out.push_back(shrinker_value(s, target));
  return out;
}

inline ShrinkTarget parse_target(const std::string& name) {
  if (name == "fro") return ShrinkTarget::Frobenius;
  if (name == "op") return ShrinkTarget::Operator;
  if (name == "nuc") return ShrinkTarget::Nuclear;
  throw InputError("unknown loss '" + name + "' (expected fro, op or nuc)");
}

// Estimates in `est` follow y's orientation: a1/m1 refer to the rows of y.
struct EoptResult {
  Mat s_os;   // loss-target shrinkage
  Mat s_amp;  // amplitude-corrected reconstruction
  Mat z_hat;  // y - s_os
  SpikeEstimates est;
  SvdTriplet top;        // top r_hat singular triplets of y
  std::vector<double> phi;
  bool transposed = false;
};

inline EoptResult eoptshrink(const Mat& y, ShrinkTarget target, std::optional<double> c = {}) {
  require_finite(y, "eoptshrink");
  const bool flip = y.rows() > y.cols();
  const Mat oriented = flip ? Mat(y.transpose()) : y;
  const Index p = oriented.rows(), n = oriented.cols();
  const GramSpectrum gs(oriented);
  const SpectrumView spec{gs.eigs(), p, n};
  EoptResult out;
  out.est = estimate_spikes(spec, c);
  const Index r = out.est.r_hat;
  SvdTriplet top = gs.top(r);
  out.phi = shrinker_values(out.est, target);
  Mat s_os = Mat::Zero(p, n), s_amp = Mat::Zero(p, n);
  for (Index i = 0; i < r; ++i) {
    const Mat outer = top.U.col(i) * top.V.col(i).transpose();
    s_os += out.phi[static_cast<std::size_t>(i)] * outer;
    s_amp += amplitude_value(out.est.spikes[static_cast<std::size_t>(i)]) * outer;
  }
  out.transposed = flip;
  if (flip) {
    // Report overlaps in the caller's orientation: a1 belongs to rows of y.
    for (Spike& sp : out.est.spikes) {
      std::swap(sp.a1_hat, sp.a2_hat);
      std::swap(sp.m1, sp.m2);
      std::swap(sp.m1p, sp.m2p);
    }
    out.s_os = s_os.transpose();
    out.s_amp = s_amp.transpose();
    out.top = SvdTriplet{top.V, top.sigma, top.U};
    fix_signs(out.top.U, out.top.V);
  } else {
    out.s_os = std::move(s_os);
    out.s_amp = std::move(s_amp);
    out.top = std::move(top);
  }
  out.z_hat = y - out.s_os;
  return out;
}

}  // namespace eows
