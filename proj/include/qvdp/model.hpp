#pragma once

#include <optional>
#include <vector>

#include "qvdp/fock.hpp"

namespace qvdp {

// All rates in the same time unit (the CLI normalizes to gamma1 = 1).
struct SystemParams {
  std::optional<double> omega1;  // lab-frame frequencies, labeling only
  std::optional<double> omega2;
  double delta = 0.0;  // omega2 - 2 omega1
  double kerr1 = 0.0;
  double kerr2 = 0.0;
  double gamma1 = 1.0;  // one-phonon gain
  double gamma2 = 10.0;  // two-phonon loss
  double zeta = 0.0;
  FockSpace dims{{20, 20}};

  void set_kerr(double k) { kerr1 = kerr2 = k; }
  void set_dims(int d) { dims = FockSpace({d, d}); }

  // Checks rates are non-negative, two modes with >= 4 levels each, and
  // delta agrees with omega2 - 2 omega1 when both frequencies are given.
  void validate() const;
};

enum class Frame { rotating, lab };

/// Linear map on column-stacked density matrices, vec(rho)[i + N j] = rho(i, j).
///
/// Optionally carries an integer charge per basis state that the map conserves
/// in the sense charge(i) - charge(j) is invariant for every element |i><j|;
/// the solvers use it to work on one block at a time.
class SuperOperator {
 public:
  SuperOperator(FockSpace space, SparseMatrix matrix);

  const FockSpace& space() const { return space_; }
  const SparseMatrix& matrix() const { return matrix_; }

  DenseMatrix apply(const DenseMatrix& rho) const;
  Vector apply_vec(const Vector& v) const { return matrix_ * v; }

  SuperOperator operator+(const SuperOperator& rhs) const;
  SuperOperator operator*(cplx scale) const;

  // Verifies conservation before storing the labels; throws otherwise.
  SuperOperator with_charge(std::vector<int> charge) const;
  bool has_charge() const { return !charge_.empty(); }
  const std::vector<int>& charge() const { return charge_; }
  int element_charge(Index vec_index) const;

  // Sorted vectorized indices whose charge difference equals `difference`.
  std::vector<Index> sector(int difference) const;
  SparseMatrix restricted(const std::vector<Index>& indices) const;

 private:
  FockSpace space_;
  SparseMatrix matrix_;
  std::vector<int> charge_;
};

Vector vectorize(const DenseMatrix& rho);
DenseMatrix unvectorize(const Vector& v, Index n);

// Rotating-frame H = Delta n2 + sum_i K_i a_i^dag2 a_i^2 + zeta (a1^dag2 a2 + a1^2 a2^dag).
// Frame::lab uses omega1 n1 + omega2 n2 in place of Delta n2 and needs both omegas.
SparseOperator build_hamiltonian(const SystemParams& params, Frame frame = Frame::rotating);

SuperOperator hamiltonian_part(const SparseOperator& h);

// rate * (o rho o^dag - 1/2 {o^dag o, rho})
SuperOperator dissipator(const SparseOperator& op, double rate);

SuperOperator build_liouvillian(const SystemParams& params, Frame frame = Frame::rotating);

// L0: the zeta = 0 part of the Liouvillian.
SuperOperator build_unperturbed_liouvillian(const SystemParams& params);

// q = n1 + 2 n2, conserved by H and by both dissipators.
std::vector<int> excitation_charge(const FockSpace& space);

}  // namespace qvdp
