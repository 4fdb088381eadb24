#include "qvdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include <unsupported/Eigen/KroneckerProduct>

#include "qvdp/errors.hpp"

namespace qvdp {

void SystemParams::validate() const {
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw InvalidArgument("rates must be non-negative");
  if (!std::isfinite(delta) || !std::isfinite(zeta) || !std::isfinite(kerr1) || !std::isfinite(kerr2)) {
    throw InvalidArgument("parameters must be finite");
  }
  if (dims.modes() != 2) throw InvalidArgument("the model has exactly two modes");
  for (int k = 0; k < 2; ++k) {
    if (dims.dim(k) < 4) {
      throw TruncationTooSmall("each mode needs at least 4 Fock levels, mode " + std::to_string(k) +
                               " has " + std::to_string(dims.dim(k)));
    }
  }
  if (omega1 && omega2) {
    const double implied = *omega2 - 2.0 * *omega1;
    const double scale = std::max({1.0, std::abs(*omega1), std::abs(*omega2)});
    if (std::abs(implied - delta) > 1e-12 * scale) {
      throw InvalidArgument("delta inconsistent with omega2 - 2 omega1");
    }
  }
}

SuperOperator::SuperOperator(FockSpace space, SparseMatrix matrix)
    : space_(std::move(space)), matrix_(std::move(matrix)) {
  const Index n2 = space_.size() * space_.size();
  if (matrix_.rows() != n2 || matrix_.cols() != n2) {
    throw ShapeMismatch("superoperator dimensions do not match its Fock space");
  }
  matrix_.makeCompressed();
}

DenseMatrix SuperOperator::apply(const DenseMatrix& rho) const {
  const Index n = space_.size();
  if (rho.rows() != n || rho.cols() != n) throw ShapeMismatch("superoperator applied to wrong shape");
  return unvectorize(matrix_ * vectorize(rho), n);
}

SuperOperator SuperOperator::operator+(const SuperOperator& rhs) const {
  if (space_ != rhs.space_) throw ShapeMismatch("superoperator sum across spaces");
  return {space_, SparseMatrix(matrix_ + rhs.matrix_)};
}

SuperOperator SuperOperator::operator*(cplx scale) const {
  return {space_, SparseMatrix(matrix_ * scale)};
}

int SuperOperator::element_charge(Index vec_index) const {
  const Index n = space_.size();
  return charge_[static_cast<size_t>(vec_index % n)] - charge_[static_cast<size_t>(vec_index / n)];
}

SuperOperator SuperOperator::with_charge(std::vector<int> charge) const {
  if (static_cast<Index>(charge.size()) != space_.size()) throw ShapeMismatch("charge label count mismatch");
  SuperOperator out(space_, matrix_);
  out.charge_ = std::move(charge);
  for (Index col = 0; col < matrix_.outerSize(); ++col) {
    const int qc = out.element_charge(col);
    for (SparseMatrix::InnerIterator it(matrix_, col); it; ++it) {
      if (it.value() != cplx{0.0} && out.element_charge(it.row()) != qc) {
        throw InvalidArgument("superoperator does not conserve the supplied charge");
      }
    }
  }
  return out;
}

std::vector<Index> SuperOperator::sector(int difference) const {
  if (!has_charge()) throw InvalidArgument("superoperator carries no charge labels");
  std::vector<Index> out;
  const Index n2 = matrix_.cols();
  for (Index k = 0; k < n2; ++k) {
    if (element_charge(k) == difference) out.push_back(k);
  }
  return out;
}

SparseMatrix SuperOperator::restricted(const std::vector<Index>& indices) const {
  std::vector<Index> position(static_cast<size_t>(matrix_.cols()), -1);
  for (size_t k = 0; k < indices.size(); ++k) position[static_cast<size_t>(indices[k])] = static_cast<Index>(k);
  std::vector<Eigen::Triplet<cplx>> entries;
  for (size_t k = 0; k < indices.size(); ++k) {
    for (SparseMatrix::InnerIterator it(matrix_, indices[k]); it; ++it) {
      const Index row = position[static_cast<size_t>(it.row())];
      if (row < 0) {
        if (it.value() != cplx{0.0}) throw InvalidArgument("index set is not invariant under the superoperator");
        continue;
      }
      entries.emplace_back(row, static_cast<Index>(k), it.value());
    }
  }
  const auto m = static_cast<Index>(indices.size());
  SparseMatrix sub(m, m);
  sub.setFromTriplets(entries.begin(), entries.end());
  sub.makeCompressed();
  return sub;
}

Vector vectorize(const DenseMatrix& rho) {
  return Eigen::Map<const Vector>(rho.data(), rho.size());
}

DenseMatrix unvectorize(const Vector& v, Index n) {
  if (v.size() != n * n) throw ShapeMismatch("vector length is not n^2");
  return Eigen::Map<const DenseMatrix>(v.data(), n, n);
}

SparseOperator build_hamiltonian(const SystemParams& params, Frame frame) {
  params.validate();
  const FockSpace& space = params.dims;
  const SparseOperator a1 = ladder(space, 0, Ladder::lower);
  const SparseOperator a2 = ladder(space, 1, Ladder::lower);
  const SparseOperator a1d = a1.adjoint();
  const SparseOperator a2d = a2.adjoint();

  SparseOperator h = SparseOperator::zero(space);
  if (frame == Frame::rotating) {
    h = h + (a2d * a2) * params.delta;
  } else {
    if (!params.omega1 || !params.omega2) throw InvalidArgument("lab frame needs omega1 and omega2");
    h = h + (a1d * a1) * *params.omega1 + (a2d * a2) * *params.omega2;
  }
  h = h + (a1d * a1d * a1 * a1) * params.kerr1;
  h = h + (a2d * a2d * a2 * a2) * params.kerr2;
  h = h + (a1d * a1d * a2 + a1 * a1 * a2d) * params.zeta;
  return {space, h.matrix().pruned()};
}

SuperOperator hamiltonian_part(const SparseOperator& h) {
  const Index n = h.space().size();
  SparseMatrix id(n, n);
  id.setIdentity();
  const cplx i{0.0, 1.0};
  SparseMatrix left = Eigen::kroneckerProduct(id, h.matrix());
  SparseMatrix right = Eigen::kroneckerProduct(SparseMatrix(h.matrix().transpose()), id);
  return {h.space(), SparseMatrix(-i * left + i * right)};
}

SuperOperator dissipator(const SparseOperator& op, double rate) {
  if (!(rate >= 0.0)) throw InvalidArgument("dissipation rate must be non-negative");
  const Index n = op.space().size();
  SparseMatrix id(n, n);
  id.setIdentity();
  const SparseMatrix& o = op.matrix();
  SparseMatrix odo = (SparseMatrix(o.adjoint()) * o).pruned();
  SparseMatrix jump = Eigen::kroneckerProduct(SparseMatrix(o.conjugate()), o);
  SparseMatrix left = Eigen::kroneckerProduct(id, odo);
  SparseMatrix right = Eigen::kroneckerProduct(SparseMatrix(odo.transpose()), id);
  SparseMatrix total = rate * (jump - 0.5 * left - 0.5 * right);
  return {op.space(), total.pruned()};
}

std::vector<int> excitation_charge(const FockSpace& space) {
  std::vector<int> q(static_cast<size_t>(space.size()));
  for (Index s = 0; s < space.size(); ++s) {
    const auto occ = space.occupations(s);
    q[static_cast<size_t>(s)] = occ[0] + (occ.size() > 1 ? 2 * occ[1] : 0);
  }
  return q;
}

namespace {

SuperOperator assemble(const SystemParams& params, const SparseOperator& h) {
  const FockSpace& space = params.dims;
  SuperOperator total = hamiltonian_part(h);
  for (int mode = 0; mode < 2; ++mode) {
    const SparseOperator a = ladder(space, mode, Ladder::lower);
    total = total + dissipator(a.adjoint(), params.gamma1);
    total = total + dissipator(a * a, params.gamma2);
  }
  return total.with_charge(excitation_charge(space));
}

}  // namespace

SuperOperator build_liouvillian(const SystemParams& params, Frame frame) {
  return assemble(params, build_hamiltonian(params, frame));
}

SuperOperator build_unperturbed_liouvillian(const SystemParams& params) {
  SystemParams p = params;
  p.zeta = 0.0;
  return assemble(p, build_hamiltonian(p));
}

}  // namespace qvdp
