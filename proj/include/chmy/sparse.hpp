#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chmy {

/// Compressed-row matrix with sorted column indices per row. Symmetric
/// operators are stored in full.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<int> row_ptr,
               std::vector<int> col_idx, std::vector<double> values);

  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Value at (i, j), zero when outside the pattern.
  double at(std::size_t i, std::size_t j) const;
  /// Position of (i, j) in values(), or -1.
  std::ptrdiff_t find(std::size_t i, std::size_t j) const;

  std::vector<double> multiply(std::span<const double> x) const;
  void multiply(std::span<const double> x, std::span<double> y) const;

  std::vector<double> row_sums() const;
  double max_abs() const;
  SparseMatrix transpose() const;
  /// max |A - A^T| over all entries.
  double asymmetry() const;
  SparseMatrix scaled(double factor) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// Sum of matrices; the result pattern is the union of both patterns.
SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, double alpha = 1.0,
                 double beta = 1.0);

/// Assembles a 2x2 block matrix [[a, b], [c, d]] from equally sized blocks.
SparseMatrix block2x2(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c,
                      const SparseMatrix& d);

/// Builds a CSR matrix from (row, col, value) triplets, summing duplicates in
/// input order.
struct Triplet {
  int row;
  int col;
  double value;
};
SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse direct LU with partial pivoting. The symbolic analysis is reused as
/// long as the sparsity pattern does not change between factorizations.
class DirectSolver {
 public:
  DirectSolver();
  ~DirectSolver();
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;
  DirectSolver(const DirectSolver&) = delete;
  DirectSolver& operator=(const DirectSolver&) = delete;

  /// Throws SingularMatrixError when the factorization breaks down.
  void factorize(const SparseMatrix& a);
  /// Solves with the last factorization. One step of iterative refinement is
  /// applied when the residual contract is not met on the first try; throws
  /// SingularMatrixError when it still is not met.
  std::vector<double> solve(std::span<const double> b) const;

 private:
  struct Impl;
  Impl* impl_ = nullptr;
};

/// Relative residual measure used by the solver contract:
/// |Ax - b|_inf / (|A|_max |x|_inf + |b|_inf).
double solve_residual(const SparseMatrix& a, std::span<const double> x,
                      std::span<const double> b);

/// One-shot direct solve. Guarantees solve_residual(a, x, b) <= 1e-9.
std::vector<double> linear_solve(const SparseMatrix& a, std::span<const double> b);

}  // namespace chmy
