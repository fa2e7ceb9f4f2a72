#include "chmy/sparse.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "chmy/kernels.hpp"

namespace chmy {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<int> row_ptr,
                           std::vector<int> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1 || col_idx_.size() != values_.size() ||
      static_cast<std::size_t>(row_ptr_.back()) != values_.size()) {
    throw std::invalid_argument("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      const int c = col_idx_[static_cast<std::size_t>(p)];
      if (c < 0 || static_cast<std::size_t>(c) >= cols_) {
        throw std::invalid_argument("SparseMatrix: column index out of range");
      }
      if (p > row_ptr_[i] && col_idx_[static_cast<std::size_t>(p - 1)] >= c) {
        throw std::invalid_argument("SparseMatrix: columns not strictly sorted");
      }
    }
  }
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> d) {
  const std::size_t n = d.size();
  std::vector<int> ptr(n + 1), col(n);
  std::iota(ptr.begin(), ptr.end(), 0);
  std::iota(col.begin(), col.end(), 0);
  return SparseMatrix(n, n, std::move(ptr), std::move(col), std::vector<double>(d.begin(), d.end()));
}

std::ptrdiff_t SparseMatrix::find(std::size_t i, std::size_t j) const {
  const auto begin = col_idx_.begin() + row_ptr_[i];
  const auto end = col_idx_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(begin, end, static_cast<int>(j));
  if (it == end || *it != static_cast<int>(j)) return -1;
  return it - col_idx_.begin();
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  const auto p = find(i, j);
  return p < 0 ? 0.0 : values_[static_cast<std::size_t>(p)];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols_) throw std::invalid_argument("SparseMatrix::multiply: size mismatch");
  kernels::CsrView view{rows_, row_ptr_.data(), col_idx_.data(), values_.data()};
  kernels::spmv(view, x, y);
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  multiply(x, y);
  return y;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) sums[i] += values_[static_cast<std::size_t>(p)];
  }
  return sums;
}

double SparseMatrix::max_abs() const { return kernels::max_abs(values_); }

SparseMatrix SparseMatrix::transpose() const {
  std::vector<int> ptr(cols_ + 1, 0);
  for (int c : col_idx_) ++ptr[static_cast<std::size_t>(c) + 1];
  std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
  std::vector<int> next(ptr.begin(), ptr.end() - 1);
  std::vector<int> col(nnz());
  std::vector<double> val(nnz());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      const auto q = static_cast<std::size_t>(next[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(p)])]++);
      col[q] = static_cast<int>(i);
      val[q] = values_[static_cast<std::size_t>(p)];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(ptr), std::move(col), std::move(val));
}

double SparseMatrix::asymmetry() const {
  if (rows_ != cols_) throw std::invalid_argument("asymmetry of a non-square matrix");
  const SparseMatrix d = add(*this, transpose(), 1.0, -1.0);
  return d.max_abs();
}

SparseMatrix SparseMatrix::scaled(double factor) const {
  SparseMatrix r = *this;
  for (double& v : r.values_) v *= factor;
  return r;
}

SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, double alpha, double beta) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: dimension mismatch");
  }
  std::vector<int> ptr{0};
  std::vector<int> col;
  std::vector<double> val;
  col.reserve(std::max(a.nnz(), b.nnz()));
  val.reserve(std::max(a.nnz(), b.nnz()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    int p = a.row_ptr()[i], pe = a.row_ptr()[i + 1];
    int q = b.row_ptr()[i], qe = b.row_ptr()[i + 1];
    while (p < pe || q < qe) {
      const int ca = p < pe ? a.col_idx()[static_cast<std::size_t>(p)] : std::numeric_limits<int>::max();
      const int cb = q < qe ? b.col_idx()[static_cast<std::size_t>(q)] : std::numeric_limits<int>::max();
      if (ca == cb) {
        col.push_back(ca);
        val.push_back(alpha * a.values()[static_cast<std::size_t>(p++)] +
                      beta * b.values()[static_cast<std::size_t>(q++)]);
      } else if (ca < cb) {
        col.push_back(ca);
        val.push_back(alpha * a.values()[static_cast<std::size_t>(p++)]);
      } else {
        col.push_back(cb);
        val.push_back(beta * b.values()[static_cast<std::size_t>(q++)]);
      }
    }
    ptr.push_back(static_cast<int>(col.size()));
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(ptr), std::move(col), std::move(val));
}

SparseMatrix block2x2(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c,
                      const SparseMatrix& d) {
  const std::size_t n = a.rows();
  for (const SparseMatrix* m : {&a, &b, &c, &d}) {
    if (m->rows() != n || m->cols() != n) throw std::invalid_argument("block2x2: block size mismatch");
  }
  std::vector<int> ptr{0};
  std::vector<int> col;
  std::vector<double> val;
  col.reserve(a.nnz() + b.nnz() + c.nnz() + d.nnz());
  val.reserve(col.capacity());
  auto append_row = [&](const SparseMatrix& m, std::size_t i, int offset) {
    for (int p = m.row_ptr()[i]; p < m.row_ptr()[i + 1]; ++p) {
      col.push_back(m.col_idx()[static_cast<std::size_t>(p)] + offset);
      val.push_back(m.values()[static_cast<std::size_t>(p)]);
    }
  };
  const int off = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    append_row(a, i, 0);
    append_row(b, i, off);
    ptr.push_back(static_cast<int>(col.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    append_row(c, i, 0);
    append_row(d, i, off);
    ptr.push_back(static_cast<int>(col.size()));
  }
  return SparseMatrix(2 * n, 2 * n, std::move(ptr), std::move(col), std::move(val));
}

SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& x, const Triplet& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  std::vector<int> ptr(rows + 1, 0);
  std::vector<int> col;
  std::vector<double> val;
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const Triplet& e = triplets[t];
    if (e.row < 0 || static_cast<std::size_t>(e.row) >= rows || e.col < 0 ||
        static_cast<std::size_t>(e.col) >= cols) {
      throw std::invalid_argument("from_triplets: index out of range");
    }
    if (t > 0 && triplets[t - 1].row == e.row && triplets[t - 1].col == e.col) {
      val.back() += e.value;
      continue;
    }
    col.push_back(e.col);
    val.push_back(e.value);
    ++ptr[static_cast<std::size_t>(e.row) + 1];
  }
  std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
  return SparseMatrix(rows, cols, std::move(ptr), std::move(col), std::move(val));
}

double solve_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> b) {
  std::vector<double> r = a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  const double scale = a.max_abs() * kernels::max_abs(x) + kernels::max_abs(b);
  const double rn = kernels::max_abs(r);
  if (scale == 0.0) return rn;
  return rn / scale;
}

namespace {
constexpr double kResidualContract = 1e-9;

using EigenMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

EigenMatrix to_eigen(const SparseMatrix& a) {
  // A row-major map of the CSR arrays converted to column-major storage.
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> view(
      static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()),
      static_cast<Eigen::Index>(a.nnz()), a.row_ptr().data(), a.col_idx().data(),
      a.values().data());
  EigenMatrix m(view);
  m.makeCompressed();
  return m;
}
}  // namespace

struct DirectSolver::Impl {
  Eigen::SparseLU<EigenMatrix, Eigen::COLAMDOrdering<int>> lu;
  SparseMatrix matrix;
  std::vector<int> pattern_ptr;
  std::vector<int> pattern_col;
  bool factorized = false;
};

DirectSolver::DirectSolver() : impl_(new Impl) {}
DirectSolver::~DirectSolver() { delete impl_; }
DirectSolver::DirectSolver(DirectSolver&& other) noexcept : impl_(other.impl_) {
  other.impl_ = nullptr;
}
DirectSolver& DirectSolver::operator=(DirectSolver&& other) noexcept {
  if (this != &other) {
    delete impl_;
    impl_ = other.impl_;
    other.impl_ = nullptr;
  }
  return *this;
}

void DirectSolver::factorize(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("DirectSolver: matrix not square");
  for (double v : a.values()) {
    if (!std::isfinite(v)) throw SingularMatrixError("matrix has non-finite entries");
  }
  Impl& s = *impl_;
  const EigenMatrix m = to_eigen(a);
  const bool same_pattern = s.factorized && s.pattern_ptr == a.row_ptr() && s.pattern_col == a.col_idx();
  if (!same_pattern) {
    s.lu.analyzePattern(m);
    s.pattern_ptr = a.row_ptr();
    s.pattern_col = a.col_idx();
  }
  s.factorized = false;
  s.lu.factorize(m);
  if (s.lu.info() != Eigen::Success) {
    throw SingularMatrixError("sparse LU failed: " + s.lu.lastErrorMessage());
  }
  s.matrix = a;
  s.factorized = true;
}

std::vector<double> DirectSolver::solve(std::span<const double> b) const {
  const Impl& s = *impl_;
  if (!s.factorized) throw std::logic_error("DirectSolver::solve before factorize");
  if (b.size() != s.matrix.rows()) throw std::invalid_argument("DirectSolver::solve: size mismatch");
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::VectorXd x = s.lu.solve(rhs);
  std::vector<double> out(x.data(), x.data() + x.size());
  if (!std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); })) {
    throw SingularMatrixError("direct solve produced non-finite values");
  }
  if (solve_residual(s.matrix, out, b) <= kResidualContract) return out;

  // One step of iterative refinement.
  std::vector<double> r = s.matrix.multiply(out);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const Eigen::Map<const Eigen::VectorXd> rr(r.data(), static_cast<Eigen::Index>(r.size()));
  const Eigen::VectorXd dx = s.lu.solve(rr);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += dx[static_cast<Eigen::Index>(i)];
  if (!(solve_residual(s.matrix, out, b) <= kResidualContract)) {
    throw SingularMatrixError("direct solve missed the residual contract; matrix is numerically singular");
  }
  return out;
}

std::vector<double> linear_solve(const SparseMatrix& a, std::span<const double> b) {
  DirectSolver solver;
  solver.factorize(a);
  return solver.solve(b);
}

}  // namespace chmy
