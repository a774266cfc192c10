#pragma once

// Truncated number-basis (Fock) linear algebra for a single bosonic mode.

#include <complex>
#include <cstddef>
#include <optional>
#include <string>

#include "quasiphase/errors.hpp"
#include "quasiphase/linalg.hpp"

namespace quasiphase {

/// Numerical tolerances shared by the whole library.
struct Tolerances {
  double hermitian = 1e-12; ///< max |X - X^dagger| for Hermitian-flagged operators
  double psd = 1e-10;       ///< smallest admissible eigenvalue of a density operator is -psd
  double tail = 1e-8;       ///< probability weight allowed above the cutoff
};

const Tolerances& tolerances();
/// Replaces the global tolerances. Call before any concurrent use.
void set_tolerances(const Tolerances& tol);

/// Closed-form Glauber-Sudarshan function of a displaced thermal state:
/// P(alpha) = exp(-|alpha - center|^2 / nbar) / nbar, with nbar > 0.
struct GaussianP {
  double nbar = 0.0;
  Complex center{};
};

/// A complex N x N matrix in the basis |0>, ..., |N-1>.
class TruncatedOperator {
public:
  explicit TruncatedOperator(Matrix entries, std::string label = {}, bool hermitian_hint = false);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& matrix() const noexcept { return entries_; }
  Complex operator()(std::size_t row, std::size_t col) const {
    return entries_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }
  bool hermitian_hint() const noexcept { return hermitian_hint_; }
  const std::string& label() const noexcept { return label_; }
  const std::optional<GaussianP>& closed_form_p() const noexcept { return closed_form_p_; }

  Complex trace() const { return entries_.trace(); }

  TruncatedOperator with_label(std::string label) const;
  TruncatedOperator with_closed_form_p(std::optional<GaussianP> p) const;
  /// Crops to the leading n x n block or zero-pads up to n.
  TruncatedOperator resized(std::size_t n) const;

private:
  Matrix entries_;
  std::string label_;
  bool hermitian_hint_;
  std::optional<GaussianP> closed_form_p_;
};

/// Truncation bookkeeping for states whose support extends past the cutoff.
struct TailReport {
  std::size_t input_dim = 0;
  std::size_t work_dim = 0;
  double tail_mass = 0.0;
};

/// A Hermitian, unit-trace (up to the tail tolerance), positive operator.
class DensityOperator {
public:
  /// Validates the invariants; throws NonHermitian or InvalidArgument.
  explicit DensityOperator(TruncatedOperator op, std::optional<TailReport> tail = std::nullopt,
                           double tail_tolerance = tolerances().tail);

  const TruncatedOperator& op() const noexcept { return op_; }
  std::size_t dim() const noexcept { return op_.dim(); }
  const Matrix& matrix() const noexcept { return op_.matrix(); }
  const std::string& label() const noexcept { return op_.label(); }
  const std::optional<TailReport>& tail() const noexcept { return tail_; }

  operator const TruncatedOperator&() const noexcept { return op_; }

private:
  TruncatedOperator op_;
  std::optional<TailReport> tail_;
};

TruncatedOperator annihilation_matrix(std::size_t dim);
TruncatedOperator number_matrix(std::size_t dim);
/// diag((-1)^n).
TruncatedOperator parity_matrix(std::size_t dim);

DensityOperator fock_state(std::size_t n, std::size_t dim);

/// Amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!) for n < dim, without a tail check.
Vector coherent_amplitudes(Complex alpha, std::size_t dim);
/// Poisson weight sum_{n >= dim} exp(-mean) mean^n / n!.
double poisson_tail(double mean, std::size_t dim);
/// Smallest cutoff whose Poisson tail is at most tol.
std::size_t required_dim_poisson(double mean, double tol);

/// |alpha><alpha| truncated at dim; throws TruncationError if the tail is too heavy.
DensityOperator coherent_state(Complex alpha, std::size_t dim);
/// Geometric populations nbar^n / (nbar + 1)^(n + 1).
DensityOperator thermal_state(double nbar, std::size_t dim);
/// Inverse temperature of the thermal state with mean photon number nbar.
double thermal_beta(double nbar);
/// D(alpha) g D(alpha)^dagger with g thermal; computed on a padded space.
DensityOperator displaced_thermal_state(double nbar, Complex alpha, std::size_t dim);

/// How many extra levels the displacement exponential is computed on.
enum class Padding {
  standard,   ///< ceil(8|beta|^2 + 6|beta|): accurate on the low part of the block
  full_block, ///< adds the spread of the highest retained level, accurate on the whole block
};

std::size_t standard_padding(double beta_abs);
std::size_t full_block_padding(double beta_abs, std::size_t dim);

struct Displacement {
  TruncatedOperator op;
  std::size_t padded_dim;
  /// max |(D^dagger D - I)_ij| on the low 75% of the retained block.
  double unitarity_defect;
};

/// exp(beta a^dagger - beta^* a) computed on a padded space and cropped to dim.
Displacement displacement_matrix(Complex beta, std::size_t dim, Padding padding = Padding::standard);

struct DisplacedParity {
  TruncatedOperator op;
  /// Trace of the truncated operator; oscillates with the cutoff.
  double truncated_trace;
  double unitarity_defect;
};

/// 2 D(alpha) (-1)^{a^dagger a} D(alpha)^dagger, products taken on the padded space.
DisplacedParity displaced_parity(Complex alpha, std::size_t dim);

/// Re Tr[a^dagger a X]; throws NonHermitian if a Hermitian-flagged X gives an imaginary part.
double mean_photon(const TruncatedOperator& x);

/// Half the trace norm of A - B, after zero-padding both to a common dimension.
double trace_distance(const TruncatedOperator& a, const TruncatedOperator& b);
/// <psi|rho|psi> for a pure target given by its amplitudes.
double fidelity_with_pure(const TruncatedOperator& rho, const Vector& psi);
/// Probability weight on the last `levels` basis states (diagonal sum).
double edge_weight(const TruncatedOperator& x, std::size_t levels);
/// Largest absolute entry in the last row or column.
double edge_magnitude(const TruncatedOperator& x);
/// Crops x to the smallest dimension whose discarded diagonal weight is below tol.
TruncatedOperator trim(const TruncatedOperator& x, double tol, std::size_t min_dim = 1);

} // namespace quasiphase
