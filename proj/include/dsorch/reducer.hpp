#pragma once

// Pluggable dimensionality reduction ahead of mixture fitting. The default
// is exact PCA: deterministic and testable. Alternative reducers (UMAP-style
// manifold approximations) can be slotted in behind the same interface.

#include <vector>

#include <Eigen/Dense>

#include "dsorch/common.hpp"

namespace dsorch {

using Matrix = std::vector<std::vector<double>>;

class Reducer {
 public:
  virtual ~Reducer() = default;
  virtual Matrix reduce(const Matrix& rows, std::size_t target_dim) const = 0;
};

class IdentityReducer final : public Reducer {
 public:
  Matrix reduce(const Matrix& rows, std::size_t) const override { return rows; }
};

class PcaReducer final : public Reducer {
 public:
  // Centers the data and projects onto the top target_dim principal axes.
  // Component signs are fixed (largest-magnitude loading positive) so the
  // projection is reproducible.
  Matrix reduce(const Matrix& rows, std::size_t target_dim) const override {
    const std::size_t n = rows.size();
    if (n == 0) return {};
    const std::size_t d = rows[0].size();
    if (target_dim == 0 || target_dim >= d || n < 2) return rows;

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n > 1 ? n - 1 : 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

    // Eigenvalues come back ascending; take the trailing target_dim columns.
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(target_dim));
    for (std::size_t c = 0; c < target_dim; ++c) {
      Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
      Eigen::Index imax = 0;
      v.cwiseAbs().maxCoeff(&imax);
      if (v(imax) < 0) v = -v;
      basis.col(static_cast<Eigen::Index>(c)) = v;
    }

    Eigen::MatrixXd proj = x * basis;
    Matrix out(n, std::vector<double>(target_dim));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < target_dim; ++j) {
        out[i][j] = proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    return out;
  }
};

}  // namespace dsorch
