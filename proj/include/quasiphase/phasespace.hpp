#pragma once

// Phase-space grids and the P, W, Q quasiprobability distributions.
//
// Convention: no 1/pi prefactor on the distributions; the measure is always
// d^2 alpha / pi. The vacuum Wigner function peaks at 2 and Q is bounded by 1.

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "quasiphase/fock.hpp"
#include "quasiphase/serialize.hpp"

namespace quasiphase {

/// Square lattice {center + (j h - R) + i (k h - R)}, j, k = 0 .. floor(2R/h).
class PhaseGrid {
public:
  PhaseGrid(double half_extent, double spacing, Complex center = {});

  double half_extent() const noexcept { return half_extent_; }
  double spacing() const noexcept { return spacing_; }
  Complex center() const noexcept { return center_; }
  std::size_t points_per_axis() const noexcept { return count_; }
  /// Offset of lattice index j from the center along either axis.
  double offset(std::size_t j) const noexcept {
    return static_cast<double>(j) * spacing_ - half_extent_;
  }
  /// Point with real-axis index j and imaginary-axis index k.
  Complex point(std::size_t j, std::size_t k) const noexcept {
    return center_ + Complex(offset(j), offset(k));
  }
  bool on_boundary(std::size_t j, std::size_t k) const noexcept {
    return j == 0 || k == 0 || j + 1 == count_ || k + 1 == count_;
  }
  /// True when the point lies at least `margin` (in alpha units) inside every edge.
  bool is_interior(std::size_t j, std::size_t k, double margin) const noexcept;

private:
  double half_extent_;
  double spacing_;
  Complex center_;
  std::size_t count_;
};

enum class DistKind { P, W, Q };

std::string to_string(DistKind kind);
DistKind dist_kind_from_string(const std::string& s);

/// Real samples of a quasiprobability distribution; values(j, k) sits at grid.point(j, k).
struct QuasiDistribution {
  PhaseGrid grid;
  DistKind kind;
  Eigen::MatrixXd values;
  std::string source_label;
};

/// <alpha|X|alpha>. Requires the coherent state to fit the cutoff of X.
Complex q_at(const TruncatedOperator& x, Complex alpha);

/// Tr[X Pi(alpha)] with the displaced parity built from the padded exponential.
Complex w_at(const TruncatedOperator& x, Complex alpha);

/// Characteristic function chi(beta) = Tr[X D(beta)] tabulated on a grid,
/// evaluated through an eigendecomposition of the quadrature generator.
class CharacteristicFunction {
public:
  /// Throws GridTooSmall if |chi| on the grid boundary exceeds boundary_tolerance.
  CharacteristicFunction(const TruncatedOperator& x, const PhaseGrid& beta_grid,
                         double boundary_tolerance = 1e-3);

  const PhaseGrid& grid() const noexcept { return grid_; }
  const Eigen::MatrixXcd& values() const noexcept { return chi_; }
  double boundary_max() const noexcept { return boundary_max_; }

  /// Riemann sum of h^2/pi chi(beta) exp(alpha beta^* - alpha^* beta).
  double wigner(Complex alpha) const;

private:
  PhaseGrid grid_;
  Eigen::MatrixXcd chi_;
  double boundary_max_ = 0.0;
};

/// Wigner value from the Fourier integral of the characteristic function.
double w_char_at(const TruncatedOperator& x, Complex alpha, const PhaseGrid& beta_grid,
                 double boundary_tolerance = 1e-3);

/// (1/nbar) exp(-|alpha|^2 / nbar); throws SingularP for nbar = 0.
double p_thermal_at(double nbar, Complex alpha);
double p_gaussian_at(const GaussianP& p, Complex alpha);

/// Pointwise evaluation over the grid. P requires a registered closed form.
QuasiDistribution sample(const TruncatedOperator& x, DistKind kind, const PhaseGrid& grid);
/// As above, additionally asserting the Q bounds that hold for states.
QuasiDistribution sample(const DensityOperator& rho, DistKind kind, const PhaseGrid& grid);

/// Gaussian smoothing (1/t) int d^2beta/pi f(beta) exp(-|alpha - beta|^2 / t) on the same grid.
/// t = 1/2 maps P to W and W to Q; t = 1 maps P to Q.
QuasiDistribution weierstrass(const QuasiDistribution& dist, double t,
                              double boundary_tolerance = 1e-8);

/// h^2/pi times the sum of all samples.
double integrate(const QuasiDistribution& dist);

struct Negativity {
  double min_value;
  double negative_volume;
};
Negativity negativity(const QuasiDistribution& dist);

/// Largest |value| on the outermost ring of grid points.
double boundary_max(const QuasiDistribution& dist);

/// Max |a - b| over points at least `margin` inside the boundary.
/// Both distributions must share the same grid.
double interior_max_deviation(const QuasiDistribution& a, const QuasiDistribution& b, double margin);

/// re_alpha,im_alpha,value rows.
std::string to_csv(const QuasiDistribution& dist);
/// Grid metadata plus row-major values[j][k] (j along Re alpha, k along Im alpha).
Json to_json(const QuasiDistribution& dist);

} // namespace quasiphase
