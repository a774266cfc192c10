#include "quasiphase/fock.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

namespace quasiphase {

namespace {

Tolerances g_tolerances{};

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_dim(std::size_t dim, const char* what) {
  if (dim == 0) throw InvalidDimension(std::string(what) + ": dimension must be at least 1");
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string complex_label(Complex z) {
  std::ostringstream os;
  os.precision(6);
  os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
  return os.str();
}

Matrix padded_displacement(Complex beta, std::size_t padded) {
  Matrix a = annihilation_matrix(padded).matrix();
  Matrix generator = beta * a.adjoint() - std::conj(beta) * a;
  return expm(generator);
}

double low_block_defect(const Matrix& d) {
  auto k = static_cast<Eigen::Index>((3 * d.rows()) / 4);
  if (k == 0) return 0.0;
  Matrix gram = d.leftCols(k).adjoint() * d.leftCols(k);
  return (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
}

} // namespace

const Tolerances& tolerances() { return g_tolerances; }
void set_tolerances(const Tolerances& tol) { g_tolerances = tol; }

// TruncatedOperator

TruncatedOperator::TruncatedOperator(Matrix entries, std::string label, bool hermitian_hint)
    : entries_(std::move(entries)), label_(std::move(label)), hermitian_hint_(hermitian_hint) {
  if (entries_.rows() != entries_.cols())
    throw InvalidDimension("operator matrix must be square");
  if (entries_.rows() == 0) throw InvalidDimension("operator dimension must be at least 1");
  if (!entries_.allFinite()) throw InvalidArgument("operator '" + label_ + "' has non-finite entries");
  if (hermitian_hint_) {
    double defect = hermiticity_defect(entries_);
    if (defect > g_tolerances.hermitian)
      throw NonHermitian("operator '" + label_ + "' flagged Hermitian has defect " + fmt(defect),
                         defect);
  }
}

TruncatedOperator TruncatedOperator::with_label(std::string label) const {
  TruncatedOperator out = *this;
  out.label_ = std::move(label);
  return out;
}

TruncatedOperator TruncatedOperator::with_closed_form_p(std::optional<GaussianP> p) const {
  TruncatedOperator out = *this;
  out.closed_form_p_ = p;
  return out;
}

TruncatedOperator TruncatedOperator::resized(std::size_t n) const {
  require_dim(n, "resized");
  TruncatedOperator out = *this;
  out.entries_ = quasiphase::resized(entries_, n);
  return out;
}

// DensityOperator

DensityOperator::DensityOperator(TruncatedOperator op, std::optional<TailReport> tail,
                                 double tail_tolerance)
    : op_(std::move(op)), tail_(tail) {
  double defect = hermiticity_defect(op_.matrix());
  if (defect > g_tolerances.hermitian)
    throw NonHermitian("density operator '" + op_.label() + "' is not Hermitian (defect " +
                           fmt(defect) + ")",
                       defect);
  double tr = op_.trace().real();
  if (std::abs(tr - 1.0) > tail_tolerance)
    throw InvalidArgument("density operator '" + op_.label() + "' has trace " + fmt(tr));
  double min_eig = hermitian_eigenvalues(op_.matrix()).minCoeff();
  if (min_eig < -g_tolerances.psd)
    throw InvalidArgument("density operator '" + op_.label() + "' has eigenvalue " + fmt(min_eig));
  if (!op_.hermitian_hint()) {
    Matrix h = (op_.matrix() + op_.matrix().adjoint()) / 2.0;
    op_ = TruncatedOperator(std::move(h), op_.label(), true).with_closed_form_p(op_.closed_form_p());
  }
}

// Constructors

TruncatedOperator annihilation_matrix(std::size_t dim) {
  require_dim(dim, "annihilation_matrix");
  Matrix a = Matrix::Zero(idx(dim), idx(dim));
  for (std::size_t n = 1; n < dim; ++n) a(idx(n - 1), idx(n)) = std::sqrt(static_cast<double>(n));
  return TruncatedOperator(std::move(a), "a");
}

TruncatedOperator number_matrix(std::size_t dim) {
  require_dim(dim, "number_matrix");
  Matrix n = Matrix::Zero(idx(dim), idx(dim));
  for (std::size_t k = 0; k < dim; ++k) n(idx(k), idx(k)) = static_cast<double>(k);
  return TruncatedOperator(std::move(n), "n", true);
}

TruncatedOperator parity_matrix(std::size_t dim) {
  require_dim(dim, "parity_matrix");
  Matrix p = Matrix::Zero(idx(dim), idx(dim));
  for (std::size_t k = 0; k < dim; ++k) p(idx(k), idx(k)) = (k % 2 == 0) ? 1.0 : -1.0;
  return TruncatedOperator(std::move(p), "parity", true);
}

DensityOperator fock_state(std::size_t n, std::size_t dim) {
  require_dim(dim, "fock_state");
  if (n >= dim)
    throw OutOfCutoff("fock_state: level " + std::to_string(n) + " is outside cutoff " +
                      std::to_string(dim));
  Matrix rho = Matrix::Zero(idx(dim), idx(dim));
  rho(idx(n), idx(n)) = 1.0;
  return DensityOperator(TruncatedOperator(std::move(rho), "fock:" + std::to_string(n), true),
                         TailReport{dim, dim, 0.0});
}

Vector coherent_amplitudes(Complex alpha, std::size_t dim) {
  Vector c(idx(dim));
  if (dim == 0) return c;
  c(0) = std::exp(-std::norm(alpha) / 2.0);
  for (std::size_t n = 1; n < dim; ++n)
    c(idx(n)) = c(idx(n - 1)) * alpha / std::sqrt(static_cast<double>(n));
  return c;
}

double poisson_tail(double mean, std::size_t dim) {
  if (mean < 0.0) throw InvalidArgument("poisson_tail: negative mean");
  if (mean == 0.0) return dim == 0 ? 1.0 : 0.0;
  double sum = 0.0;
  for (std::size_t n = dim;; ++n) {
    double nd = static_cast<double>(n);
    double term = std::exp(-mean + nd * std::log(mean) - std::lgamma(nd + 1.0));
    sum += term;
    if (nd > mean && term <= 1e-18 * sum) break;
    if (nd > mean && term == 0.0) break;
  }
  return std::min(sum, 1.0);
}

std::size_t required_dim_poisson(double mean, double tol) {
  std::size_t n = 1;
  while (poisson_tail(mean, n) > tol) ++n;
  return n;
}

DensityOperator coherent_state(Complex alpha, std::size_t dim) {
  require_dim(dim, "coherent_state");
  double mean = std::norm(alpha);
  double tail = poisson_tail(mean, dim);
  double tol = g_tolerances.tail;
  if (tail > tol) {
    auto need = required_dim_poisson(mean, tol);
    throw TruncationError("coherent_state(" + complex_label(alpha) + "): tail mass " + fmt(tail) +
                              " above tolerance " + fmt(tol) + " at dim " + std::to_string(dim) +
                              "; requires dim >= " + std::to_string(need),
                          need, tail);
  }
  Vector c = coherent_amplitudes(alpha, dim);
  Matrix rho = c * c.adjoint();
  return DensityOperator(
      TruncatedOperator(std::move(rho), "coherent:" + complex_label(alpha), true),
      TailReport{dim, dim, tail});
}

double thermal_beta(double nbar) {
  if (nbar <= 0.0) throw InvalidArgument("thermal_beta: nbar must be positive");
  return std::log1p(1.0 / nbar);
}

DensityOperator thermal_state(double nbar, std::size_t dim) {
  require_dim(dim, "thermal_state");
  if (!(nbar >= 0.0) || !std::isfinite(nbar))
    throw InvalidArgument("thermal_state: nbar must be a finite non-negative number");
  double ratio = nbar / (nbar + 1.0);
  double tail = std::pow(ratio, static_cast<double>(dim));
  double tol = g_tolerances.tail;
  if (tail > tol) {
    auto need = static_cast<std::size_t>(std::ceil(std::log(tol) / std::log(ratio)));
    throw TruncationError("thermal_state(" + fmt(nbar) + "): tail mass " + fmt(tail) +
                              " above tolerance " + fmt(tol) + " at dim " + std::to_string(dim) +
                              "; requires dim >= " + std::to_string(need),
                          need, tail);
  }
  Matrix rho = Matrix::Zero(idx(dim), idx(dim));
  double p = 1.0 / (nbar + 1.0);
  for (std::size_t n = 0; n < dim; ++n) {
    rho(idx(n), idx(n)) = p;
    p *= ratio;
  }
  TruncatedOperator op(std::move(rho), "thermal:" + fmt(nbar), true);
  if (nbar > 0.0) op = op.with_closed_form_p(GaussianP{nbar, {}});
  return DensityOperator(std::move(op), TailReport{dim, dim, tail});
}

DensityOperator displaced_thermal_state(double nbar, Complex alpha, std::size_t dim) {
  require_dim(dim, "displaced_thermal_state");
  if (!(nbar >= 0.0)) throw InvalidArgument("displaced_thermal_state: nbar must be non-negative");
  double tol = g_tolerances.tail;
  double ratio = nbar / (nbar + 1.0);
  // Thermal factor resolved well past the displaced support.
  std::size_t thermal_dim = dim;
  while (std::pow(ratio, static_cast<double>(thermal_dim)) > 1e-17 && thermal_dim < 4096) thermal_dim *= 2;
  std::size_t padded = thermal_dim + full_block_padding(std::abs(alpha), thermal_dim);
  Matrix d = padded_displacement(alpha, padded);
  Eigen::VectorXd pops = Eigen::VectorXd::Zero(idx(padded));
  double p = 1.0 / (nbar + 1.0);
  for (std::size_t n = 0; n < thermal_dim; ++n) {
    pops(idx(n)) = p;
    p *= ratio;
  }
  Matrix full = d * pops.asDiagonal() * d.adjoint();
  Matrix rho = full.topLeftCorner(idx(dim), idx(dim));
  double tail = std::max(0.0, 1.0 - rho.trace().real());
  if (tail > tol) {
    std::size_t need = dim;
    double kept = rho.trace().real();
    while (need < padded && 1.0 - kept > tol) {
      kept += full(idx(need), idx(need)).real();
      ++need;
    }
    throw TruncationError("displaced_thermal_state: tail mass " + fmt(tail) + " at dim " +
                              std::to_string(dim) + "; requires dim >= " + std::to_string(need),
                          need, tail);
  }
  rho = (rho + rho.adjoint()).eval() / 2.0;
  TruncatedOperator op(std::move(rho), "displaced_thermal:" + fmt(nbar) + "@" + complex_label(alpha),
                       true);
  if (nbar > 0.0) op = op.with_closed_form_p(GaussianP{nbar, alpha});
  return DensityOperator(std::move(op), TailReport{dim, padded, tail});
}

// Displacement and parity

std::size_t standard_padding(double beta_abs) {
  return static_cast<std::size_t>(std::ceil(8.0 * beta_abs * beta_abs + 6.0 * beta_abs));
}

std::size_t full_block_padding(double beta_abs, std::size_t dim) {
  double spread = 6.0 * beta_abs * std::sqrt(2.0 * static_cast<double>(dim)) + beta_abs * beta_abs;
  return standard_padding(beta_abs) + static_cast<std::size_t>(std::ceil(spread)) + 8;
}

Displacement displacement_matrix(Complex beta, std::size_t dim, Padding padding) {
  require_dim(dim, "displacement_matrix");
  double b = std::abs(beta);
  std::size_t pad = padding == Padding::standard ? standard_padding(b) : full_block_padding(b, dim);
  std::size_t padded = dim + pad;
  Matrix d = padded_displacement(beta, padded).topLeftCorner(idx(dim), idx(dim));
  double defect = low_block_defect(d);
  return {TruncatedOperator(std::move(d), "D(" + complex_label(beta) + ")"), padded, defect};
}

DisplacedParity displaced_parity(Complex alpha, std::size_t dim) {
  require_dim(dim, "displaced_parity");
  std::size_t padded = dim + full_block_padding(std::abs(alpha), dim);
  Matrix d = padded_displacement(alpha, padded);
  Eigen::VectorXd signs(idx(padded));
  for (std::size_t n = 0; n < padded; ++n) signs(idx(n)) = (n % 2 == 0) ? 2.0 : -2.0;
  Matrix full = d * signs.asDiagonal() * d.adjoint();
  Matrix pi = full.topLeftCorner(idx(dim), idx(dim));
  pi = (pi + pi.adjoint()).eval() / 2.0;
  double defect = low_block_defect(d.topLeftCorner(idx(dim), idx(dim)));
  double tr = pi.trace().real();
  return {TruncatedOperator(std::move(pi), "parity:" + complex_label(alpha), true), tr, defect};
}

// Scalar diagnostics

double mean_photon(const TruncatedOperator& x) {
  Complex sum{};
  for (std::size_t n = 1; n < x.dim(); ++n) sum += static_cast<double>(n) * x(n, n);
  if (x.hermitian_hint() && std::abs(sum.imag()) > 1e-10)
    throw NonHermitian("mean_photon: imaginary part " + fmt(sum.imag()) + " for Hermitian operator",
                       std::abs(sum.imag()));
  return sum.real();
}

double trace_distance(const TruncatedOperator& a, const TruncatedOperator& b) {
  std::size_t n = std::max(a.dim(), b.dim());
  Matrix diff = resized(a.matrix(), n) - resized(b.matrix(), n);
  if (hermiticity_defect(diff) <= 1e-9) return 0.5 * hermitian_trace_norm(diff);
  Eigen::BDCSVD<Matrix> svd(diff);
  return 0.5 * svd.singularValues().sum();
}

double fidelity_with_pure(const TruncatedOperator& rho, const Vector& psi) {
  auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(rho.dim()), psi.size());
  Vector v = psi.head(n);
  return (v.adjoint() * rho.matrix().topLeftCorner(n, n) * v)(0).real();
}

double edge_weight(const TruncatedOperator& x, std::size_t levels) {
  double sum = 0.0;
  std::size_t n = x.dim();
  for (std::size_t k = n - std::min(levels, n); k < n; ++k) sum += std::abs(x(k, k));
  return sum;
}

double edge_magnitude(const TruncatedOperator& x) {
  auto last = static_cast<Eigen::Index>(x.dim()) - 1;
  return std::max(x.matrix().row(last).cwiseAbs().maxCoeff(),
                  x.matrix().col(last).cwiseAbs().maxCoeff());
}

TruncatedOperator trim(const TruncatedOperator& x, double tol, std::size_t min_dim) {
  std::size_t keep = x.dim();
  double discarded = 0.0;
  while (keep > std::max<std::size_t>(min_dim, 1)) {
    double next = discarded + std::abs(x(keep - 1, keep - 1));
    if (next > tol) break;
    discarded = next;
    --keep;
  }
  return keep == x.dim() ? x : x.resized(keep);
}

} // namespace quasiphase
