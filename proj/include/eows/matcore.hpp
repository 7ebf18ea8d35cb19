#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace eows {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct SvdTriplet {
  Mat U;      // p x k
  Vec sigma;  // descending
  Mat V;      // n x k

  [[nodiscard]] Index rank() const { return sigma.size(); }
  [[nodiscard]] Mat reconstruct() const {
    return U * sigma.asDiagonal() * V.transpose();
  }
};

struct Metrics {
  double mse = 0.0;
  double left_inner = 0.0;
  double right_inner = 0.0;
};

inline void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw InputError(what + ": non-finite entries");
}

// Flip each (u_i, v_i) pair so the largest-magnitude entry of u_i is >= 0.
// Ties go to the lowest index.
inline void fix_signs(Mat& U, Mat& V) {
  for (Index j = 0; j < U.cols(); ++j) {
    Index best = 0;
    double mag = -1.0;
    for (Index i = 0; i < U.rows(); ++i) {
      const double a = std::abs(U(i, j));
      if (a > mag) {
        mag = a;
        best = i;
      }
    }
    if (U.rows() > 0 && U(best, j) < 0.0) {
      U.col(j) = -U.col(j);
      if (j < V.cols()) V.col(j) = -V.col(j);
    }
  }
}

// Thin SVD truncated to the top k triplets.
inline SvdTriplet svd(const Mat& m, Index k) {
  require_finite(m, "svd");
  require(k >= 0 && k <= std::min(m.rows(), m.cols()),
          "svd: k must not exceed min(p, n)");
  Eigen::BDCSVD<Mat> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) throw NumericError("svd: no convergence");
  SvdTriplet out{solver.matrixU().leftCols(k), solver.singularValues().head(k),
                 solver.matrixV().leftCols(k)};
  fix_signs(out.U, out.V);
  return out;
}

// Eigen-decomposition of the smaller Gram matrix m m^T (expects p <= n).
// Eigenvalues are descending and clipped at 0; top(k) lifts the leading
// eigenvectors to singular triplets.
class GramSpectrum {
 public:
  explicit GramSpectrum(const Mat& m) : m_(&m) {
    require_finite(m, "gram_spectrum");
    require(m.rows() <= m.cols(), "gram_spectrum: expects p <= n");
    Eigen::SelfAdjointEigenSolver<Mat> es(m * m.transpose());
    if (es.info() != Eigen::Success) throw NumericError("eigensolver: no convergence");
    eigs_ = es.eigenvalues().reverse().cwiseMax(0.0);
    vecs_ = es.eigenvectors().rowwise().reverse();
  }

  [[nodiscard]] const Vec& eigs() const { return eigs_; }

  [[nodiscard]] SvdTriplet top(Index k) const {
    require(k >= 0 && k <= eigs_.size(), "gram_spectrum: k out of range");
    SvdTriplet out{vecs_.leftCols(k), Vec(k), Mat(m_->cols(), k)};
    for (Index j = 0; j < k; ++j) {
      const Vec w = m_->transpose() * out.U.col(j);
      const double s = w.norm();
      out.sigma(j) = s;
      if (s > 0.0)
        out.V.col(j) = w / s;
      else
        out.V.col(j).setZero();
    }
    fix_signs(out.U, out.V);
    return out;
  }

 private:
  const Mat* m_;
  Vec eigs_;
  Mat vecs_;
};

inline double mse(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

inline double subspace_inner(const Mat& U_true, const Vec& u_hat) {
  require(U_true.rows() == u_hat.size(), "subspace_inner: length mismatch");
  require(std::abs(u_hat.norm() - 1.0) <= 1e-6, "subspace_inner: u_hat must be a unit vector");
  return (U_true.transpose() * u_hat).norm();
}

}  // namespace eows
