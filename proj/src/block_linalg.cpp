#include "senssched/block_linalg.hpp"

#include <cmath>
#include <string>

#include "senssched/errors.hpp"

namespace senssched {

namespace {

double min_eigenvalue(const MatrixXd &m) {
  if (m.rows() == 0) {
    return 0.0;
  }
  if (!m.allFinite()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

void check_tridiagonal_shapes(std::span<const MatrixXd> diag,
                              std::span<const MatrixXd> upper) {
  if (diag.empty()) {
    if (!upper.empty()) {
      throw DimensionMismatch("block tridiagonal: off-diagonal blocks without diagonal blocks");
    }
    return;
  }
  if (upper.size() + 1 != diag.size()) {
    throw DimensionMismatch("block tridiagonal: expected " +
                            std::to_string(diag.size() - 1) +
                            " off-diagonal blocks, got " +
                            std::to_string(upper.size()));
  }
  for (std::size_t k = 0; k < diag.size(); ++k) {
    if (diag[k].rows() != diag[k].cols()) {
      throw DimensionMismatch("block tridiagonal: diagonal block " +
                              std::to_string(k) + " is not square");
    }
  }
  for (std::size_t k = 0; k < upper.size(); ++k) {
    if (upper[k].rows() != diag[k].rows() ||
        upper[k].cols() != diag[k + 1].rows()) {
      throw DimensionMismatch("block tridiagonal: off-diagonal block " +
                              std::to_string(k) + " has wrong shape");
    }
  }
}

}  // namespace

BlockTridiagonalMatrix::BlockTridiagonalMatrix(std::vector<MatrixXd> diag_blocks,
                                               std::vector<MatrixXd> upper_blocks)
    : diag_(std::move(diag_blocks)), upper_(std::move(upper_blocks)) {
  check_tridiagonal_shapes(diag_, upper_);
  offsets_.reserve(diag_.size() + 1);
  offsets_.push_back(0);
  for (auto &block : diag_) {
    block = 0.5 * (block + block.transpose()).eval();
    offsets_.push_back(offsets_.back() + block.rows());
  }
}

BlockTridiagonalMatrix BlockTridiagonalMatrix::uniform(const MatrixXd &diag,
                                                       const MatrixXd &upper,
                                                       std::size_t num_blocks) {
  std::vector<MatrixXd> d(num_blocks, diag);
  std::vector<MatrixXd> u(num_blocks == 0 ? 0 : num_blocks - 1, upper);
  return BlockTridiagonalMatrix(std::move(d), std::move(u));
}

Index BlockTridiagonalMatrix::uniform_block_dim() const {
  if (diag_.empty()) {
    return 0;
  }
  const Index n = diag_.front().rows();
  for (const auto &block : diag_) {
    if (block.rows() != n) {
      throw DimensionMismatch("block tridiagonal: blocks are not uniform");
    }
  }
  return n;
}

MatrixXd BlockTridiagonalMatrix::to_dense() const {
  MatrixXd out = MatrixXd::Zero(rows(), rows());
  for (std::size_t k = 0; k < diag_.size(); ++k) {
    const Index o = offsets_[k];
    out.block(o, o, diag_[k].rows(), diag_[k].cols()) = diag_[k];
    if (k + 1 < diag_.size()) {
      const Index o2 = offsets_[k + 1];
      out.block(o, o2, upper_[k].rows(), upper_[k].cols()) = upper_[k];
      out.block(o2, o, upper_[k].cols(), upper_[k].rows()) = upper_[k].transpose();
    }
  }
  return out;
}

BlockDiagonalMatrix::BlockDiagonalMatrix(std::vector<MatrixXd> blocks)
    : blocks_(std::move(blocks)) {}

Index BlockDiagonalMatrix::rows() const {
  Index r = 0;
  for (const auto &b : blocks_) r += b.rows();
  return r;
}

Index BlockDiagonalMatrix::cols() const {
  Index c = 0;
  for (const auto &b : blocks_) c += b.cols();
  return c;
}

MatrixXd BlockDiagonalMatrix::to_dense() const {
  MatrixXd out = MatrixXd::Zero(rows(), cols());
  Index r = 0;
  Index c = 0;
  for (const auto &b : blocks_) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

BlockDiagonalMatrix BlockDiagonalMatrix::inverse() const {
  std::vector<MatrixXd> inv;
  inv.reserve(blocks_.size());
  for (const auto &b : blocks_) {
    if (b.rows() != b.cols()) {
      throw DimensionMismatch("block diagonal inverse: block is not square");
    }
    if (b.rows() == 0) {
      inv.emplace_back(0, 0);
      continue;
    }
    Eigen::FullPivLU<MatrixXd> lu(b);
    if (!lu.isInvertible()) {
      throw InvalidParams("block diagonal inverse: singular block");
    }
    inv.push_back(lu.inverse());
  }
  return BlockDiagonalMatrix(std::move(inv));
}

Eigen::LLT<MatrixXd> checked_llt(const MatrixXd &m, std::size_t block_index) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    throw NotPositiveDefinite(
        "matrix is not positive definite (pivot block " +
            std::to_string(block_index) + ")",
        block_index, min_eigenvalue(m));
  }
  return llt;
}

double logdet_from_llt(const Eigen::LLT<MatrixXd> &llt) {
  const auto diag = llt.matrixLLT().diagonal();
  double total = 0.0;
  for (Index i = 0; i < diag.size(); ++i) {
    total += std::log(diag(i));
  }
  return 2.0 * total;
}

double logdet_dense(const MatrixXd &m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("logdet_dense: matrix is not square");
  }
  if (m.rows() == 0) {
    return 0.0;
  }
  return logdet_from_llt(checked_llt(m));
}

double logdet_block_tridiagonal(std::span<const MatrixXd> diag,
                                std::span<const MatrixXd> upper) {
  check_tridiagonal_shapes(diag, upper);
  double total = 0.0;
  Eigen::LLT<MatrixXd> prev;
  bool prev_empty = true;
  MatrixXd pivot;
  for (std::size_t k = 0; k < diag.size(); ++k) {
    if (diag[k].rows() == 0) {
      prev_empty = true;
      continue;
    }
    pivot = diag[k];
    if (k > 0 && !prev_empty) {
      pivot.noalias() -= upper[k - 1].transpose() * prev.solve(upper[k - 1]);
    }
    prev = checked_llt(pivot, k);
    prev_empty = false;
    total += logdet_from_llt(prev);
  }
  return total;
}

double logdet_block_tridiagonal(const BlockTridiagonalMatrix &m) {
  return logdet_block_tridiagonal(std::span<const MatrixXd>(m.diag_blocks()),
                                  std::span<const MatrixXd>(m.upper_blocks()));
}

BlockTridiagonalCholesky::BlockTridiagonalCholesky(const BlockTridiagonalMatrix &m) {
  factor(m.diag_blocks(), m.upper_blocks());
}

BlockTridiagonalCholesky::BlockTridiagonalCholesky(std::span<const MatrixXd> diag,
                                                   std::span<const MatrixXd> upper) {
  factor(diag, upper);
}

void BlockTridiagonalCholesky::factor(std::span<const MatrixXd> diag,
                                      std::span<const MatrixXd> upper) {
  check_tridiagonal_shapes(diag, upper);
  const std::size_t num = diag.size();
  pivots_.resize(num);
  upper_.assign(upper.begin(), upper.end());
  offsets_.assign(1, 0);
  log_det_ = 0.0;
  for (std::size_t k = 0; k < num; ++k) {
    offsets_.push_back(offsets_.back() + diag[k].rows());
    if (diag[k].rows() == 0) {
      continue;
    }
    MatrixXd pivot = diag[k];
    if (k > 0 && diag[k - 1].rows() > 0) {
      pivot.noalias() -= upper[k - 1].transpose() * pivots_[k - 1].solve(upper[k - 1]);
    }
    pivots_[k] = checked_llt(pivot, k);
    log_det_ += logdet_from_llt(pivots_[k]);
  }
}

VectorXd BlockTridiagonalCholesky::solve(const VectorXd &b) const {
  const std::size_t num = pivots_.size();
  if (b.size() != offsets_.back()) {
    throw DimensionMismatch("solve_block_tridiagonal: right-hand side has length " +
                            std::to_string(b.size()) + ", expected " +
                            std::to_string(offsets_.back()));
  }
  auto dim = [&](std::size_t k) { return offsets_[k + 1] - offsets_[k]; };

  // Forward: z_k = b_k - C_{k-1}^T D_{k-1}^{-1} z_{k-1}
  VectorXd z = b;
  for (std::size_t k = 1; k < num; ++k) {
    if (dim(k) == 0 || dim(k - 1) == 0) continue;
    const VectorXd w = pivots_[k - 1].solve(z.segment(offsets_[k - 1], dim(k - 1)));
    z.segment(offsets_[k], dim(k)).noalias() -= upper_[k - 1].transpose() * w;
  }
  // Backward: x_k = D_k^{-1} (z_k - C_k x_{k+1})
  VectorXd x(b.size());
  for (std::size_t kk = num; kk-- > 0;) {
    if (dim(kk) == 0) continue;
    VectorXd rhs = z.segment(offsets_[kk], dim(kk));
    if (kk + 1 < num && dim(kk + 1) > 0) {
      rhs.noalias() -= upper_[kk] * x.segment(offsets_[kk + 1], dim(kk + 1));
    }
    x.segment(offsets_[kk], dim(kk)) = pivots_[kk].solve(rhs);
  }
  return x;
}

BlockTridiagonalMatrix add_block_diagonal(const BlockTridiagonalMatrix &m,
                                          const BlockDiagonalMatrix &d) {
  if (d.num_blocks() != m.num_blocks()) {
    throw DimensionMismatch("add_block_diagonal: block counts differ");
  }
  std::vector<MatrixXd> diag = m.diag_blocks();
  for (std::size_t k = 0; k < diag.size(); ++k) {
    if (d.block(k).rows() != diag[k].rows() || d.block(k).cols() != diag[k].cols()) {
      throw DimensionMismatch("add_block_diagonal: block " + std::to_string(k) +
                              " has wrong shape");
    }
    diag[k] += d.block(k);
  }
  return BlockTridiagonalMatrix(std::move(diag), m.upper_blocks());
}

VectorXd solve_block_tridiagonal(const BlockTridiagonalMatrix &m, const VectorXd &b) {
  if (b.size() != m.rows()) {
    throw DimensionMismatch("solve_block_tridiagonal: right-hand side length mismatch");
  }
  return BlockTridiagonalCholesky(m).solve(b);
}

VectorXd multiply(const BlockTridiagonalMatrix &m, const VectorXd &x) {
  if (x.size() != m.rows()) {
    throw DimensionMismatch("block tridiagonal multiply: vector length mismatch");
  }
  VectorXd y = VectorXd::Zero(x.size());
  for (std::size_t k = 0; k < m.num_blocks(); ++k) {
    const Index o = m.block_offset(k);
    const Index d = m.block_dim(k);
    y.segment(o, d).noalias() += m.diag_block(k) * x.segment(o, d);
    if (k + 1 < m.num_blocks()) {
      const Index o2 = m.block_offset(k + 1);
      const Index d2 = m.block_dim(k + 1);
      y.segment(o, d).noalias() += m.upper_block(k) * x.segment(o2, d2);
      y.segment(o2, d2).noalias() += m.upper_block(k).transpose() * x.segment(o, d);
    }
  }
  return y;
}

}  // namespace senssched
