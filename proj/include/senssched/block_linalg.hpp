#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace senssched {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/*
 * Symmetric block-tridiagonal matrix
 *
 *   | B_1    C_1                      |
 *   | C_1^T  B_2    C_2               |
 *   |        C_2^T  ...    C_{K-1}    |
 *   |               C_{K-1}^T  B_K    |
 *
 * Only the diagonal blocks B_k and the upper off-diagonal blocks C_k are
 * stored. Diagonal blocks may have different sizes (including zero); block
 * C_k is dim(k) x dim(k+1). The uniform case dim(k) = n is what the prior
 * models produce; the innovation covariance of the covariance-form entropy
 * has one block per step sized by the number of selected measurement rows.
 *
 * Diagonal blocks are symmetrized on construction.
 */
class BlockTridiagonalMatrix {
 public:
  BlockTridiagonalMatrix() = default;
  BlockTridiagonalMatrix(std::vector<MatrixXd> diag_blocks,
                         std::vector<MatrixXd> upper_blocks);

  /// Uniform blocks: K copies of `diag` with `upper` on every off-diagonal.
  static BlockTridiagonalMatrix uniform(const MatrixXd &diag,
                                        const MatrixXd &upper,
                                        std::size_t num_blocks);

  std::size_t num_blocks() const { return diag_.size(); }
  Index block_dim(std::size_t k) const { return diag_[k].rows(); }
  /// Common block size; throws DimensionMismatch if the blocks differ.
  Index uniform_block_dim() const;
  Index rows() const { return offsets_.empty() ? 0 : offsets_.back(); }
  Index block_offset(std::size_t k) const { return offsets_[k]; }

  const std::vector<MatrixXd> &diag_blocks() const { return diag_; }
  const std::vector<MatrixXd> &upper_blocks() const { return upper_; }
  const MatrixXd &diag_block(std::size_t k) const { return diag_[k]; }
  const MatrixXd &upper_block(std::size_t k) const { return upper_[k]; }

  MatrixXd to_dense() const;

 private:
  std::vector<MatrixXd> diag_;
  std::vector<MatrixXd> upper_;
  std::vector<Index> offsets_;
};

/// Block-diagonal matrix of rectangular blocks; off-block entries are zero.
class BlockDiagonalMatrix {
 public:
  BlockDiagonalMatrix() = default;
  explicit BlockDiagonalMatrix(std::vector<MatrixXd> blocks);

  std::size_t num_blocks() const { return blocks_.size(); }
  const MatrixXd &block(std::size_t k) const { return blocks_[k]; }
  const std::vector<MatrixXd> &blocks() const { return blocks_; }
  Index rows() const;
  Index cols() const;

  MatrixXd to_dense() const;
  /// Blockwise inverse; every block must be square and invertible.
  BlockDiagonalMatrix inverse() const;

 private:
  std::vector<MatrixXd> blocks_;
};

/*
 * Block LDL^T factorization of a symmetric positive definite
 * block-tridiagonal matrix via the pivot recursion
 *
 *   D_1 = B_1,   D_k = B_k - C_{k-1}^T D_{k-1}^{-1} C_{k-1}
 *
 * with each pivot D_k held as a Cholesky factor. Cost is linear in the number
 * of blocks.
 */
class BlockTridiagonalCholesky {
 public:
  explicit BlockTridiagonalCholesky(const BlockTridiagonalMatrix &m);
  BlockTridiagonalCholesky(std::span<const MatrixXd> diag_blocks,
                           std::span<const MatrixXd> upper_blocks);

  double log_determinant() const { return log_det_; }
  VectorXd solve(const VectorXd &b) const;

 private:
  void factor(std::span<const MatrixXd> diag, std::span<const MatrixXd> upper);

  std::vector<Eigen::LLT<MatrixXd>> pivots_;
  std::vector<MatrixXd> upper_;
  std::vector<Index> offsets_;
  double log_det_ = 0.0;
};

double logdet_block_tridiagonal(const BlockTridiagonalMatrix &m);

/// Same recursion on raw block lists, without building a matrix object.
double logdet_block_tridiagonal(std::span<const MatrixXd> diag_blocks,
                                std::span<const MatrixXd> upper_blocks);

double logdet_dense(const MatrixXd &m);

/// log det from an already computed Cholesky factor.
double logdet_from_llt(const Eigen::LLT<MatrixXd> &llt);

/// Cholesky factorization that throws NotPositiveDefinite on failure.
Eigen::LLT<MatrixXd> checked_llt(const MatrixXd &m, std::size_t block_index = 0);

BlockTridiagonalMatrix add_block_diagonal(const BlockTridiagonalMatrix &m,
                                          const BlockDiagonalMatrix &d);

VectorXd solve_block_tridiagonal(const BlockTridiagonalMatrix &m,
                                 const VectorXd &b);

/// y = M x without assembling M.
VectorXd multiply(const BlockTridiagonalMatrix &m, const VectorXd &x);

}  // namespace senssched
