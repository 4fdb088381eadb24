#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qvdp {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr double kDensityTol = 1e-10;
inline constexpr double kPositivityTol = 1e-8;

/// Truncated Fock space of one or two bosonic modes.
///
/// Composite basis states are ordered with mode 0 as the slow index:
/// |n0, n1> sits at n0 * dims[1] + n1.
class FockSpace {
 public:
  explicit FockSpace(std::vector<int> dims);

  int modes() const { return static_cast<int>(dims_.size()); }
  int dim(int mode) const;
  const std::vector<int>& dims() const { return dims_; }
  Index size() const { return size_; }

  Index index(std::initializer_list<int> occupations) const;
  Index index(const std::vector<int>& occupations) const;
  std::vector<int> occupations(Index state) const;

  bool operator==(const FockSpace& other) const { return dims_ == other.dims_; }
  bool operator!=(const FockSpace& other) const { return !(*this == other); }

 private:
  std::vector<int> dims_;
  Index size_ = 1;
};

/// Complex sparse matrix acting on a FockSpace.
class SparseOperator {
 public:
  SparseOperator(FockSpace space, SparseMatrix matrix);

  static SparseOperator identity(const FockSpace& space);
  static SparseOperator zero(const FockSpace& space);

  const FockSpace& space() const { return space_; }
  const SparseMatrix& matrix() const { return matrix_; }

  SparseOperator adjoint() const;
  DenseMatrix dense() const { return DenseMatrix(matrix_); }

  SparseOperator operator*(const SparseOperator& rhs) const;
  SparseOperator operator+(const SparseOperator& rhs) const;
  SparseOperator operator-(const SparseOperator& rhs) const;
  SparseOperator operator*(cplx scale) const;
  DenseMatrix operator*(const DenseMatrix& rhs) const;

 private:
  FockSpace space_;
  SparseMatrix matrix_;
};

inline SparseOperator operator*(cplx scale, const SparseOperator& op) { return op * scale; }

// Exact equality of sparsity pattern and stored values.
bool structurally_equal(const SparseOperator& a, const SparseOperator& b);

/// Hermitian, unit-trace, positive semidefinite operator.
///
/// Construction validates the invariants at `tol` (Hermiticity and trace)
/// and at max(tol, 1e-8) for the smallest eigenvalue.
class DensityMatrix {
 public:
  DensityMatrix(FockSpace space, DenseMatrix matrix, double tol = kDensityTol);

  static DensityMatrix basis(const FockSpace& space, const std::vector<int>& occupations);
  static DensityMatrix pure(const FockSpace& space, const Vector& state);
  static DensityMatrix diagonal(const FockSpace& space, const Eigen::VectorXd& weights);
  static DensityMatrix product(const DensityMatrix& first, const DensityMatrix& second);

  const FockSpace& space() const { return space_; }
  const DenseMatrix& matrix() const { return matrix_; }
  double min_eigenvalue() const;

 private:
  FockSpace space_;
  DenseMatrix matrix_;
};

enum class Ladder { lower, raise };

SparseOperator ladder(const FockSpace& space, int mode, Ladder kind);
SparseOperator number(const FockSpace& space, int mode);

// Embeds a single-mode matrix into the composite space of `space`.
SparseOperator embed(const FockSpace& space, int mode, const SparseMatrix& single);

cplx expectation(const SparseOperator& op, const DensityMatrix& rho);
cplx trace_product(const SparseMatrix& op, const DenseMatrix& rho);

DensityMatrix partial_trace(const DensityMatrix& rho, int keep);

double trace_distance(const DenseMatrix& a, const DenseMatrix& b);
double fidelity(const DensityMatrix& a, const DensityMatrix& b);

// Zero-pads rho into a space with at least as many levels per mode.
DensityMatrix embed_state(const DensityMatrix& rho, const FockSpace& larger);

}  // namespace qvdp
