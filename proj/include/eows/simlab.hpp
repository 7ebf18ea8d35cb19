#pragma once

// Synthetic experiments: signal and noise generators, the trial runner,
// summary statistics, and CSV/JSON output.

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pipeline.hpp"
#include "rng.hpp"

namespace eows {

enum class NoiseKind { Type1, Type2, Type3 };

inline NoiseKind parse_noise(const std::string& s) {
  if (s == "type1") return NoiseKind::Type1;
  if (s == "type2") return NoiseKind::Type2;
  if (s == "type3") return NoiseKind::Type3;
  throw InputError("unknown noise '" + s + "' (expected type1, type2 or type3)");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Type1;
  double df = 10.0;
  std::uint64_t seed = 0;
};

// Eigenvalues of the row and column covariance factors.
struct NoiseSpectra {
  Vec rows, cols;
};

inline NoiseSpectra noise_spectra(NoiseKind kind, Index p, Index n) {
  NoiseSpectra s{Vec::Ones(p), Vec::Ones(n)};
  const double pd = static_cast<double>(p), nd = static_cast<double>(n);
  switch (kind) {
    case NoiseKind::Type1:
      break;
    case NoiseKind::Type2:
      for (Index k = 1; k <= p; ++k) s.rows(k - 1) = std::sqrt(1.0 + 9.0 * static_cast<double>(k) / pd);
      for (Index k = 1; k <= n; ++k)
        s.cols(k - 1) = k <= n / 4 ? std::sqrt(10.0 + static_cast<double>(k) / nd) : std::sqrt(0.3);
      break;
    case NoiseKind::Type3:
      for (Index k = 1; k <= p; ++k) s.rows(k - 1) = std::exp(static_cast<double>(k) / pd);
      for (Index k = 1; k <= n; ++k) s.cols(k - 1) = 1.1 + std::sin(4.0 * std::numbers::pi * static_cast<double>(k) / nd);
      break;
  }
  return s;
}

inline Mat gaussian_matrix(Index p, Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(p, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < p; ++i) m(i, j) = g(rng);
  return m;
}

inline Mat random_orthogonal(Index n, Rng& rng) {
  const Mat g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  // Fix column signs by the diagonal of R so the draw is Haar distributed.
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Z = A^{1/2} X B^{1/2}, rescaled so that |Z|_F = sqrt(p) (mean entry
// variance 1/n). X has i.i.d. Student-t entries of variance 1/n.
inline Mat gen_noise(Index p, Index n, const NoiseSpec& spec) {
  require(p >= 2 && n >= 2, "gen_noise: dimensions must be >= 2");
  require(spec.df > 2, "gen_noise: df must exceed 2");
  Rng rng = make_rng(spec.seed, "noise-entries");
  std::student_t_distribution<double> t(spec.df);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n) * spec.df / (spec.df - 2.0));
  Mat z(p, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < p; ++i) z(i, j) = t(rng) * scale;
  if (spec.kind != NoiseKind::Type1) {
    const NoiseSpectra s = noise_spectra(spec.kind, p, n);
    Rng qa = make_rng(spec.seed, "noise-row-basis");
    Rng qb = make_rng(spec.seed, "noise-col-basis");
    const Mat a = random_orthogonal(p, qa);
    const Mat b = random_orthogonal(n, qb);
    const Mat a_half = a * s.rows.cwiseSqrt().asDiagonal() * a.transpose();
    const Mat b_half = b * s.cols.cwiseSqrt().asDiagonal() * b.transpose();
    z = a_half * z * b_half;
  }
  z *= std::sqrt(static_cast<double>(p)) / z.norm();
  return z;
}

struct Signal {
  Mat s;
  SvdTriplet truth;
};

struct HelixGeometry {
  double radius = 1.0;
  double pitch = 0.5;  // rise per turn
  double turns = 3.0;
  double sheet_x = 2.5;  // the sheet lies in the plane x = sheet_x
  double sheet_y0 = -2.0, sheet_y1 = 2.0;
  double sheet_z0 = -0.5, sheet_z1 = 2.0;
};

inline Signal gen_helmholtz(Index p, Index n, double nu = 1.0, double frob2 = 150.0, std::uint64_t seed = 0,
                            const HelixGeometry& geo = {}) {
  require(p >= 2 && n >= 2, "gen_helmholtz: dimensions must be >= 2");
  require(frob2 > 0, "gen_helmholtz: target energy must be positive");
  require(geo.sheet_y1 > geo.sheet_y0 && geo.sheet_z1 > geo.sheet_z0, "gen_helmholtz: empty sheet");
  Mat src(p, 3), dst(n, 3);
  for (Index i = 0; i < p; ++i) {
    const double th = 2.0 * std::numbers::pi * geo.turns * static_cast<double>(i) / static_cast<double>(p - 1);
    src.row(i) << geo.radius * std::cos(th), geo.radius * std::sin(th), geo.pitch * th / (2.0 * std::numbers::pi);
  }
  Rng rng = make_rng(seed, "helmholtz-sheet");
  std::uniform_real_distribution<double> uy(geo.sheet_y0, geo.sheet_y1), uz(geo.sheet_z0, geo.sheet_z1);
  Mat raw(p, n);
  for (Index j = 0; j < n; ++j) {
    for (int attempt = 0;; ++attempt) {
      dst.row(j) << geo.sheet_x, uy(rng), uz(rng);
      double closest = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < p; ++i) closest = std::min(closest, (src.row(i) - dst.row(j)).norm());
      if (closest >= 1e-6) break;
      require(attempt < 100, "gen_helmholtz: sheet intersects the helix");
    }
    for (Index i = 0; i < p; ++i) {
      const double r = (src.row(i) - dst.row(j)).norm();
      raw(i, j) = std::cos(2.0 * std::numbers::pi * nu * r) / r;
    }
  }
  Signal out;
  out.s = raw * std::sqrt(frob2) / raw.norm();
  out.truth = svd(out.s, std::min(p, n));
  return out;
}

// n x 2n matrix U D V^T with sine columns in U, cosine columns in V and
// D = diag(1..10).
inline Signal gen_sinusoid(Index n, std::uint64_t seed = 0) {
  require(n >= 10, "gen_sinusoid: n must be >= 10");
  const Index m = 2 * n, r = 10;
  Rng rng = make_rng(seed, "sinusoid-grid");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vec x(n), y(m);
  for (Index i = 0; i < n; ++i) x(i) = u01(rng);
  for (Index k = 0; k < m; ++k) y(k) = u01(rng);
  Mat u(n, r), v(m, r);
  for (Index j = 1; j <= r; ++j) {
    for (Index i = 0; i < n; ++i) u(i, j - 1) = std::sin(2.0 * std::numbers::pi * static_cast<double>(j) * x(i));
    for (Index k = 0; k < m; ++k) v(k, j - 1) = std::cos(2.0 * std::numbers::pi * static_cast<double>(j) * y(k));
  }
  Vec d(r);
  for (Index j = 0; j < r; ++j) d(j) = static_cast<double>(j + 1);
  Signal out;
  out.s = u * d.asDiagonal() * v.transpose();
  out.truth = GramSpectrum(out.s).top(r);
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct TTest {
  double stat = 0.0;
  double p = 1.0;
};

// Paired two-sided t-test. Zero-variance differences: stat 0 and p 1 when the
// mean is also zero, otherwise an infinite statistic with p 0.
inline TTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "paired_ttest: need equal lengths >= 2");
  const auto k = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= k;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (k - 1.0));
  if (sd == 0.0) {
    if (mean == 0.0) return {0.0, 1.0};
    return {mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0};
  }
  TTest out;
  out.stat = mean / (sd / std::sqrt(k));
  const boost::math::students_t dist(k - 1.0);
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.stat)));
  out.p = std::min(1.0, out.p);
  return out;
}

inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------------------
// Experiments

enum class SignalKind { Helmholtz, Sinusoid };

inline SignalKind parse_signal(const std::string& s) {
  if (s == "helmholtz") return SignalKind::Helmholtz;
  if (s == "sinusoid") return SignalKind::Sinusoid;
  throw InputError("unknown signal '" + s + "' (expected helmholtz or sinusoid)");
}

struct SignalSpec {
  SignalKind kind = SignalKind::Sinusoid;
  double nu = 1.0;
  double frob2 = 150.0;
  HelixGeometry geometry;
};

inline Signal make_signal(const SignalSpec& spec, Index n, std::uint64_t seed) {
  return spec.kind == SignalKind::Helmholtz ? gen_helmholtz(n, n, spec.nu, spec.frob2, seed, spec.geometry)
                                            : gen_sinusoid(n, seed);
}

// "noisy" is accepted as a method name and reports the observation itself.
struct ExperimentSpec {
  SignalSpec signal;
  NoiseSpec noise;
  std::vector<Index> n_grid;
  int trials = 10;
  std::vector<std::string> methods;
  EowsConfig base;  // method field is overridden per method
};

struct TrialRow {
  Index n = 0;
  std::string method;
  int trial = 0;
  double mse = 0.0;
  double left_inner = 0.0;
  double right_inner = 0.0;
  Index r_hat = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::string error;  // non-empty when the trial failed
};

struct ExperimentTable {
  std::vector<TrialRow> rows;
};

inline Metrics evaluate(const Mat& estimate, const Signal& sig, Index r_hat) {
  Metrics m;
  m.mse = mse(estimate, sig.s);
  const Index r = std::min<Index>(r_hat, sig.truth.rank());
  if (r <= 0 || estimate.squaredNorm() == 0.0) return m;
  const SvdTriplet est = detail::top_triplets(estimate, r);
  if (est.sigma(r - 1) <= 0.0) return m;
  m.left_inner = subspace_inner(sig.truth.U.leftCols(r), est.U.col(r - 1));
  m.right_inner = subspace_inner(sig.truth.V.leftCols(r), est.V.col(r - 1));
  return m;
}

inline ExperimentTable run_experiment(const ExperimentSpec& spec) {
  require(spec.trials >= 1, "run_experiment: trials must be >= 1");
  require(!spec.n_grid.empty() && !spec.methods.empty(), "run_experiment: empty grid or method list");
  for (const auto& m : spec.methods)
    if (m != "noisy") (void)parse_method(m);
  struct Job {
    Index n;
    int trial;
  };
  std::vector<Job> jobs;
  for (Index n : spec.n_grid)
    for (int t = 0; t < spec.trials; ++t) jobs.push_back({n, t});
  std::vector<std::vector<TrialRow>> per_job(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [n, t] = jobs[j];
    const std::uint64_t trial_seed = derive_seed(spec.noise.seed, "trial", static_cast<std::uint64_t>(n),
                                                 static_cast<std::uint64_t>(t));
    auto& out = per_job[j];
    try {
      const Signal sig = make_signal(spec.signal, n, derive_seed(trial_seed, "signal"));
      NoiseSpec ns = spec.noise;
      ns.seed = derive_seed(trial_seed, "noise");
      const Mat y = sig.s + gen_noise(sig.s.rows(), sig.s.cols(), ns);
      Index r_hat = eoptshrink(y, spec.base.loss, spec.base.c_exp).est.r_hat;
      for (const auto& name : spec.methods) {
        TrialRow row{n, name, t, 0, 0, 0, r_hat, trial_seed, 0, {}};
        const auto t0 = std::chrono::steady_clock::now();
        try {
          Mat estimate;
          if (name == "noisy") {
            estimate = y;
          } else {
            EowsConfig cfg = spec.base;
            cfg.method = parse_method(name);
            estimate = run(y, cfg).s_hat;
          }
          const Metrics m = evaluate(estimate, sig, r_hat);
          row.mse = m.mse;
          row.left_inner = m.left_inner;
          row.right_inner = m.right_inner;
        } catch (const std::exception& e) {
          row.error = e.what();
          row.mse = std::numeric_limits<double>::quiet_NaN();
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      for (const auto& name : spec.methods) {
        TrialRow row{n, name, t, std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, trial_seed, 0, e.what()};
        out.push_back(std::move(row));
      }
    }
  });
  ExperimentTable table;
  for (auto& rows : per_job)
    for (auto& r : rows) table.rows.push_back(std::move(r));
  return table;
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_csv(std::ostream& os, const ExperimentTable& table) {
  os << "n,method,trial,mse,left_inner,right_inner,r_hat,seed\n";
  for (const auto& r : table.rows)
    os << r.n << ',' << r.method << ',' << r.trial << ',' << format_real(r.mse) << ',' << format_real(r.left_inner)
       << ',' << format_real(r.right_inner) << ',' << r.r_hat << ',' << r.seed << '\n';
}

// Successful trials of one (n, method), ordered by trial index.
inline std::vector<const TrialRow*> select_rows(const ExperimentTable& t, Index n, const std::string& method) {
  std::vector<const TrialRow*> out;
  for (const auto& r : t.rows)
    if (r.n == n && r.method == method && r.error.empty()) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const TrialRow* a, const TrialRow* b) { return a->trial < b->trial; });
  return out;
}

inline double median_mse(const ExperimentTable& t, Index n, const std::string& method) {
  std::vector<double> v;
  for (const TrialRow* r : select_rows(t, n, method)) v.push_back(r->mse);
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(v);
}

inline nlohmann::json aggregate_json(const ExperimentTable& table, const ExperimentSpec& spec) {
  using nlohmann::json;
  json out;
  out["trials"] = spec.trials;
  out["methods"] = spec.methods;
  json groups = json::array();
  for (Index n : spec.n_grid) {
    json g;
    g["n"] = n;
    json methods = json::object();
    for (const auto& m : spec.methods) {
      const auto rows = select_rows(table, n, m);
      json s;
      s["completed"] = rows.size();
      auto summarize = [&](auto field) {
        std::vector<double> v;
        for (const TrialRow* r : rows) v.push_back(field(*r));
        json q;
        if (v.empty()) return q;
        q["median"] = median(v);
        q["iqr"] = quantile(v, 0.75) - quantile(v, 0.25);
        return q;
      };
      s["mse"] = summarize([](const TrialRow& r) { return r.mse; });
      s["left_inner"] = summarize([](const TrialRow& r) { return r.left_inner; });
      s["right_inner"] = summarize([](const TrialRow& r) { return r.right_inner; });
      methods[m] = s;
    }
    g["methods"] = methods;
    json tests = json::array();
    for (std::size_t i = 0; i < spec.methods.size(); ++i)
      for (std::size_t j = i + 1; j < spec.methods.size(); ++j) {
        const auto a = select_rows(table, n, spec.methods[i]);
        const auto b = select_rows(table, n, spec.methods[j]);
        std::vector<double> va, vb;
        for (const TrialRow* ra : a)
          for (const TrialRow* rb : b)
            if (ra->trial == rb->trial) {
              va.push_back(ra->mse);
              vb.push_back(rb->mse);
            }
        json t;
        t["a"] = spec.methods[i];
        t["b"] = spec.methods[j];
        if (va.size() >= 2) {
          const TTest tt = paired_ttest(va, vb);
          t["stat"] = std::isfinite(tt.stat) ? json(tt.stat) : json(tt.stat > 0 ? "inf" : "-inf");
          t["p"] = tt.p;
        }
        tests.push_back(t);
      }
    g["paired_ttests_mse"] = tests;
    groups.push_back(g);
  }
  out["groups"] = groups;
  return out;
}

}  // namespace eows
