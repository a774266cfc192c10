#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace quasiphase {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// Dense matrix exponential (scaling and squaring with Pade approximants).
Matrix expm(const Matrix& generator);

/// Exponential of a sparse generator computed on the connected components of
/// its sparsity graph. Generators that conserve a charge (total photon number
/// for a beamsplitter, photon-number difference for a two-mode squeezer)
/// split into many small blocks, so this stays cheap on large product spaces.
class BlockExponential {
public:
  explicit BlockExponential(const SparseMatrix& generator);

  std::size_t dim() const noexcept { return component_of_.size(); }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t largest_block() const noexcept;

  /// exp(G) applied to a vector.
  Vector apply(const Vector& v) const;
  /// exp(G) applied to the basis vector e_k.
  Vector column(std::size_t k) const;

private:
  struct Block {
    std::vector<std::size_t> indices;
    Matrix exponential;
  };
  std::vector<Block> blocks_;
  std::vector<std::size_t> component_of_;
  std::vector<std::size_t> position_in_block_;
};

/// Eigenvalues of the Hermitian part (X + X^dagger)/2, ascending.
Eigen::VectorXd hermitian_eigenvalues(const Matrix& x);

/// max_ij |X - X^dagger|.
double hermiticity_defect(const Matrix& x);

/// Zero-pads or crops a square matrix to n x n.
Matrix resized(const Matrix& x, std::size_t n);

/// Trace norm of the Hermitian part of x.
double hermitian_trace_norm(const Matrix& x);

} // namespace quasiphase
