#include "qvdp/fock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "qvdp/errors.hpp"

namespace qvdp {

FockSpace::FockSpace(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 2) {
    throw InvalidArgument("FockSpace supports one or two modes, got " +
                          std::to_string(dims_.size()));
  }
  for (int d : dims_) {
    if (d < 2) throw InvalidArgument("every Fock dimension must be >= 2");
    size_ *= d;
  }
}

int FockSpace::dim(int mode) const {
  if (mode < 0 || mode >= modes()) {
    throw InvalidArgument("mode " + std::to_string(mode) + " out of range");
  }
  return dims_[static_cast<size_t>(mode)];
}

Index FockSpace::index(std::initializer_list<int> occupations) const {
  return index(std::vector<int>(occupations));
}

Index FockSpace::index(const std::vector<int>& occupations) const {
  if (occupations.size() != dims_.size()) throw ShapeMismatch("occupation count != number of modes");
  Index idx = 0;
  for (size_t k = 0; k < dims_.size(); ++k) {
    if (occupations[k] < 0 || occupations[k] >= dims_[k]) {
      throw InvalidArgument("occupation outside truncation");
    }
    idx = idx * dims_[k] + occupations[k];
  }
  return idx;
}

std::vector<int> FockSpace::occupations(Index state) const {
  std::vector<int> occ(dims_.size());
  for (size_t k = dims_.size(); k-- > 0;) {
    occ[k] = static_cast<int>(state % dims_[k]);
    state /= dims_[k];
  }
  return occ;
}

SparseOperator::SparseOperator(FockSpace space, SparseMatrix matrix)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != space_.size() || matrix_.cols() != space_.size()) {
    throw ShapeMismatch("operator dimensions do not match its Fock space");
  }
  matrix_.makeCompressed();
}

SparseOperator SparseOperator::identity(const FockSpace& space) {
  SparseMatrix id(space.size(), space.size());
  id.setIdentity();
  return {space, std::move(id)};
}

SparseOperator SparseOperator::zero(const FockSpace& space) {
  return {space, SparseMatrix(space.size(), space.size())};
}

SparseOperator SparseOperator::adjoint() const {
  return {space_, SparseMatrix(matrix_.adjoint())};
}

SparseOperator SparseOperator::operator*(const SparseOperator& rhs) const {
  if (space_ != rhs.space_) throw ShapeMismatch("operator product across different spaces");
  SparseMatrix prod = (matrix_ * rhs.matrix_).pruned();
  return {space_, std::move(prod)};
}

SparseOperator SparseOperator::operator+(const SparseOperator& rhs) const {
  if (space_ != rhs.space_) throw ShapeMismatch("operator sum across different spaces");
  return {space_, SparseMatrix(matrix_ + rhs.matrix_)};
}

SparseOperator SparseOperator::operator-(const SparseOperator& rhs) const {
  if (space_ != rhs.space_) throw ShapeMismatch("operator difference across different spaces");
  return {space_, SparseMatrix(matrix_ - rhs.matrix_)};
}

SparseOperator SparseOperator::operator*(cplx scale) const {
  return {space_, SparseMatrix(matrix_ * scale)};
}

DenseMatrix SparseOperator::operator*(const DenseMatrix& rhs) const {
  if (rhs.rows() != space_.size()) throw ShapeMismatch("operator/matrix product shape mismatch");
  return matrix_ * rhs;
}

bool structurally_equal(const SparseOperator& a, const SparseOperator& b) {
  if (a.space() != b.space()) return false;
  const SparseMatrix& x = a.matrix();
  const SparseMatrix& y = b.matrix();
  if (x.nonZeros() != y.nonZeros()) return false;
  for (Index col = 0; col < x.outerSize(); ++col) {
    SparseMatrix::InnerIterator ix(x, col);
    SparseMatrix::InnerIterator iy(y, col);
    for (; ix && iy; ++ix, ++iy) {
      if (ix.row() != iy.row() || ix.value() != iy.value()) return false;
    }
    if (ix || iy) return false;
  }
  return true;
}

DensityMatrix::DensityMatrix(FockSpace space, DenseMatrix matrix, double tol)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != space_.size() || matrix_.cols() != space_.size()) {
    throw ShapeMismatch("density matrix dimensions do not match its Fock space");
  }
  const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > tol) {
    throw InvalidDensityMatrix("density matrix not Hermitian (deviation " + std::to_string(herm) + ")");
  }
  const cplx tr = matrix_.trace();
  if (std::abs(tr - 1.0) > tol) {
    throw InvalidDensityMatrix("density matrix trace " + std::to_string(tr.real()) + " != 1");
  }
  const double lmin = min_eigenvalue();
  if (lmin < -std::max(tol, kPositivityTol)) {
    throw InvalidDensityMatrix("density matrix has negative eigenvalue " + std::to_string(lmin));
  }
}

double DensityMatrix::min_eigenvalue() const {
  DenseMatrix herm = 0.5 * (matrix_ + matrix_.adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(herm, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

DensityMatrix DensityMatrix::basis(const FockSpace& space, const std::vector<int>& occupations) {
  DenseMatrix m = DenseMatrix::Zero(space.size(), space.size());
  const Index i = space.index(occupations);
  m(i, i) = 1.0;
  return {space, std::move(m)};
}

DensityMatrix DensityMatrix::pure(const FockSpace& space, const Vector& state) {
  if (state.size() != space.size()) throw ShapeMismatch("state vector size mismatch");
  const double nrm = state.norm();
  if (nrm == 0.0) throw InvalidArgument("zero state vector");
  Vector psi = state / nrm;
  return {space, psi * psi.adjoint()};
}

DensityMatrix DensityMatrix::diagonal(const FockSpace& space, const Eigen::VectorXd& weights) {
  if (weights.size() != space.size()) throw ShapeMismatch("weight vector size mismatch");
  DenseMatrix m = weights.cast<cplx>().asDiagonal();
  return {space, std::move(m)};
}

DensityMatrix DensityMatrix::product(const DensityMatrix& first, const DensityMatrix& second) {
  if (first.space().modes() != 1 || second.space().modes() != 1) {
    throw InvalidArgument("product expects two single-mode states");
  }
  FockSpace space({first.space().dim(0), second.space().dim(0)});
  DenseMatrix m = Eigen::kroneckerProduct(first.matrix(), second.matrix()).eval();
  return {space, std::move(m)};
}

SparseOperator embed(const FockSpace& space, int mode, const SparseMatrix& single) {
  const int d = space.dim(mode);
  if (single.rows() != d || single.cols() != d) throw ShapeMismatch("single-mode matrix size mismatch");
  if (space.modes() == 1) return {space, single};
  SparseMatrix left(space.dim(0), space.dim(0));
  SparseMatrix right(space.dim(1), space.dim(1));
  if (mode == 0) {
    right.setIdentity();
    return {space, SparseMatrix(Eigen::kroneckerProduct(single, right))};
  }
  left.setIdentity();
  return {space, SparseMatrix(Eigen::kroneckerProduct(left, single))};
}

SparseOperator ladder(const FockSpace& space, int mode, Ladder kind) {
  const int d = space.dim(mode);
  std::vector<Eigen::Triplet<cplx>> entries;
  entries.reserve(static_cast<size_t>(d));
  for (int k = 1; k < d; ++k) {
    const double amp = std::sqrt(static_cast<double>(k));
    if (kind == Ladder::lower) {
      entries.emplace_back(k - 1, k, amp);
    } else {
      entries.emplace_back(k, k - 1, amp);
    }
  }
  SparseMatrix single(d, d);
  single.setFromTriplets(entries.begin(), entries.end());
  return embed(space, mode, single);
}

SparseOperator number(const FockSpace& space, int mode) {
  const int d = space.dim(mode);
  SparseMatrix single(d, d);
  std::vector<Eigen::Triplet<cplx>> entries;
  for (int k = 1; k < d; ++k) entries.emplace_back(k, k, static_cast<double>(k));
  single.setFromTriplets(entries.begin(), entries.end());
  return embed(space, mode, single);
}

cplx trace_product(const SparseMatrix& op, const DenseMatrix& rho) {
  if (op.rows() != rho.cols() || op.cols() != rho.rows()) throw ShapeMismatch("trace product shape mismatch");
  cplx acc = 0.0;
  for (Index col = 0; col < op.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(op, col); it; ++it) {
      acc += it.value() * rho(col, it.row());
    }
  }
  return acc;
}

cplx expectation(const SparseOperator& op, const DensityMatrix& rho) {
  if (op.space() != rho.space()) throw ShapeMismatch("operator and state live on different spaces");
  return trace_product(op.matrix(), rho.matrix());
}

DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
  const FockSpace& space = rho.space();
  if (space.modes() != 2) throw InvalidArgument("partial_trace requires a two-mode state");
  if (keep != 0 && keep != 1) throw InvalidArgument("keep must be 0 or 1");
  const int d0 = space.dim(0);
  const int d1 = space.dim(1);
  const DenseMatrix& m = rho.matrix();
  const int dk = keep == 0 ? d0 : d1;
  DenseMatrix reduced = DenseMatrix::Zero(dk, dk);
  for (int i = 0; i < dk; ++i) {
    for (int j = 0; j < dk; ++j) {
      cplx acc = 0.0;
      if (keep == 0) {
        for (int t = 0; t < d1; ++t) acc += m(i * d1 + t, j * d1 + t);
      } else {
        for (int t = 0; t < d0; ++t) acc += m(t * d1 + i, t * d1 + j);
      }
      reduced(i, j) = acc;
    }
  }
  // Inherits the tolerance regime of the parent state.
  return {FockSpace({dk}), std::move(reduced), 1e-6};
}

double trace_distance(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("trace distance shape mismatch");
  DenseMatrix diff = a - b;
  diff = 0.5 * (diff + diff.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(diff, Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

namespace {

DenseMatrix psd_sqrt(const DenseMatrix& m) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (m + m.adjoint()));
  Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * s.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace

double fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.space() != b.space()) throw ShapeMismatch("fidelity across different spaces");
  DenseMatrix sa = psd_sqrt(a.matrix());
  DenseMatrix inner = sa * b.matrix() * sa;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  const double root_sum = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return root_sum * root_sum;
}

DensityMatrix embed_state(const DensityMatrix& rho, const FockSpace& larger) {
  const FockSpace& small = rho.space();
  if (small.modes() != larger.modes()) throw ShapeMismatch("mode count mismatch in embed_state");
  for (int k = 0; k < small.modes(); ++k) {
    if (larger.dim(k) < small.dim(k)) throw InvalidArgument("target space is smaller than source");
  }
  DenseMatrix m = DenseMatrix::Zero(larger.size(), larger.size());
  for (Index i = 0; i < small.size(); ++i) {
    const Index li = larger.index(small.occupations(i));
    for (Index j = 0; j < small.size(); ++j) {
      m(li, larger.index(small.occupations(j))) = rho.matrix()(i, j);
    }
  }
  return {larger, std::move(m), 1e-6};
}

}  // namespace qvdp
