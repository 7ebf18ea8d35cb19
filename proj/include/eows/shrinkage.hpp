#pragma once

// Coefficient shrinkage: soft thresholding, the classical global rule, the
// per-atom noise variance estimate after spike removal, and the robust
// threshold multiplier.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "hwt.hpp"
#include "spectre.hpp"

namespace eows {

inline double soft_threshold(double x, double t) {
  require(t >= 0, "soft_threshold: t must be >= 0");
  const double mag = std::abs(x) - t;
  if (mag <= 0) return 0.0;
  return x < 0 ? -mag : mag;
}

inline double ws_threshold(Index p, Index n, double sigma) {
  return std::sqrt(2.0 * std::log(static_cast<double>(p) * static_cast<double>(n))) * sigma /
         std::sqrt(static_cast<double>(n));
}

// Index of the tile pairing both root scaling atoms, or -1.
inline std::ptrdiff_t passthrough_tile(const std::vector<Tile>& tiles) {
  const AtomId root{0, 0, 0};
  for (std::size_t i = 0; i < tiles.size(); ++i)
    if (tiles[i].row == root && tiles[i].col == root) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

inline Mat classic_ws(const Mat& m, const TensorGhwt& tensor, double sigma, double ell = 1.0,
                      BestBasis2D* basis_out = nullptr) {
  require(sigma > 0, "classic_ws: sigma must be positive");
  const BestBasis2D basis = tensor.best_basis(m, ell);
  CoeffMap c = tensor.transform(m, basis.tiles);
  const double t = ws_threshold(m.rows(), m.cols(), sigma);
  const auto keep = passthrough_tile(c.tiles);
  for (std::size_t i = 0; i < c.values.size(); ++i)
    if (static_cast<std::ptrdiff_t>(i) != keep) c.values[i] = soft_threshold(c.values[i], t);
  if (basis_out) *basis_out = basis;
  return tensor.inverse(c);
}

// Per-axis energy of the residual noise seen by each atom, plus the total.
// row_energy[k] = |omega_k^T Z|^2 for row atom k (stacked index), and
// col_energy likewise for column atoms.
class VarTable {
 public:
  VarTable(const Mat& z_hat, const TensorGhwt& tensor, const SpikeEstimates& est)
      : p_(z_hat.rows()), n_(z_hat.cols()), total_(z_hat.squaredNorm()), spikes_(est.spikes) {
    require(!spikes_.empty(), "coeff_variance: needs at least one spike");
    row_energy_ = tensor.row_analysis(z_hat).rowwise().squaredNorm();
    col_energy_ = tensor.col_analysis(z_hat).rowwise().squaredNorm();
  }

  [[nodiscard]] double row_energy(Index k) const { return row_energy_(k); }
  [[nodiscard]] double col_energy(Index k) const { return col_energy_(k); }
  [[nodiscard]] double total_energy() const { return total_; }

  // The four summands of the variance formula, each summed over spikes.
  [[nodiscard]] std::array<double, 4> terms(double s1, double s2, double s3) const {
    const double p = static_cast<double>(p_), n = static_cast<double>(n_);
    std::array<double, 4> t{0, 0, 0, 0};
    for (const Spike& s : spikes_) {
      const double a1 = s.a1_hat, a2 = s.a2_hat;
      t[0] += s1 / (a1 * n * n);
      t[1] += s2 / (a2 * p * p);
      t[2] += (1.0 / (a1 * p * n * n) + 1.0 / (a2 * p * p * n)) * s3;
      t[3] += (1.0 / (s.d_hat * s.d_hat * a1 * a2)) * (s1 / n + s3 / (p * n)) * (s2 / p + s3 / (p * n));
    }
    return t;
  }

  [[nodiscard]] double variance(Index row_atom, Index col_atom) const {
    const auto t = terms(row_energy_(row_atom), col_energy_(col_atom), total_);
    return t[0] + t[1] + t[2] + t[3];
  }

 private:
  Index p_, n_;
  double total_;
  std::vector<Spike> spikes_;
  Vec row_energy_, col_energy_;
};

inline double coeff_variance(const Mat& z_hat, const TensorGhwt& tensor, const AtomId& row_atom,
                             const AtomId& col_atom, const SpikeEstimates& est) {
  const VarTable vt(z_hat, tensor, est);
  return vt.variance(tensor.rows().index_of(row_atom), tensor.cols().index_of(col_atom));
}

// Nearest-rank 99% quantile of |z| over the root-mean-square entry.
inline double tau_star(const Mat& z_hat, double* quantile_out = nullptr) {
  require_finite(z_hat, "tau_star");
  const double ms = z_hat.squaredNorm() / static_cast<double>(z_hat.size());
  if (ms == 0.0) {
    if (quantile_out) *quantile_out = 0.0;
    return 0.0;
  }
  std::vector<double> a(static_cast<std::size_t>(z_hat.size()));
  for (Index i = 0; i < z_hat.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(z_hat.data()[i]);
  const std::size_t rank = (99 * a.size() + 99) / 100;  // ceil(0.99 N), 1-based
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(rank - 1), a.end());
  const double q = a[rank - 1];
  if (quantile_out) *quantile_out = q;
  return q / std::sqrt(ms);
}

// Soft-thresholds value i at tau * sqrt(variance[i]); the root pair passes through.
inline CoeffMap adaptive_shrink(const CoeffMap& cm, const std::vector<double>& variance, double tau) {
  require(variance.size() == cm.values.size(), "adaptive_shrink: variance table does not match the coefficients");
  require(tau >= 0, "adaptive_shrink: tau must be >= 0");
  CoeffMap out = cm;
  const auto keep = passthrough_tile(cm.tiles);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) == keep) continue;
    require(variance[i] >= 0 && std::isfinite(variance[i]), "adaptive_shrink: invalid variance");
    out.values[i] = soft_threshold(cm.values[i], tau * std::sqrt(variance[i]));
  }
  return out;
}

}  // namespace eows
