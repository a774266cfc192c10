#include "quasiphase/phasespace.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "quasiphase/parallel.hpp"

namespace quasiphase {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Q(alpha) = c^dagger X c with c the (unnormalized-beyond-cutoff) coherent amplitudes.
// Exact for X supported on its cutoff: amplitudes above the cutoff never enter.
double husimi_value(const Matrix& x, Complex alpha, Vector& c) {
  const auto n = x.rows();
  c(0) = std::exp(-std::norm(alpha) / 2.0);
  for (Eigen::Index k = 1; k < n; ++k) c(k) = c(k - 1) * alpha / std::sqrt(static_cast<double>(k));
  Complex q = c.dot(x * c);
  return q.real();
}

// W(alpha) = 2 Tr[X D(2 alpha) (-1)^n] with the matrix elements of D(beta) obtained
// from the normalized associated-Laguerre recurrence along each off-diagonal k:
//   <n+k|D(beta)|n> = g_n^k e^{ik arg beta},  <n|D(beta)|n+k> = g_n^k (-e^{-i arg beta})^k,
//   g_0^k = x^{k/2} e^{-x/2} / sqrt(k!),  x = |beta|^2,
//   sqrt((n+1)(n+k+1)) g_{n+1} = (2n+k+1-x) g_n - sqrt(n(n+k)) g_{n-1}.
// Valid for Hermitian X, where the two triangle contributions combine to a real part.
double wigner_value(const Matrix& x, Complex alpha) {
  const auto dim = static_cast<std::size_t>(x.rows());
  const Complex beta = 2.0 * alpha;
  const double xs = std::norm(beta);
  const double r = std::abs(beta);
  const Complex phase = r > 0.0 ? beta / r : Complex(1.0, 0.0);
  double total = 0.0;
  Complex phase_k(1.0, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    const double kd = static_cast<double>(k);
    double g;
    if (xs > 0.0)
      g = std::exp(0.5 * kd * std::log(xs) - 0.5 * xs - 0.5 * std::lgamma(kd + 1.0));
    else
      g = k == 0 ? 1.0 : 0.0;
    double g_prev = 0.0;
    double band = 0.0;
    for (std::size_t n = 0; n + k < dim; ++n) {
      const double nd = static_cast<double>(n);
      const double sign = (n % 2 == 0) ? 1.0 : -1.0;
      if (k == 0)
        band += sign * g * x(idx(n), idx(n)).real();
      else
        band += sign * g * 2.0 * (x(idx(n), idx(n + k)) * phase_k).real();
      double g_next = ((2.0 * nd + kd + 1.0 - xs) * g - std::sqrt(nd * (nd + kd)) * g_prev) /
                      std::sqrt((nd + 1.0) * (nd + kd + 1.0));
      g_prev = g;
      g = g_next;
    }
    total += band;
    phase_k *= phase;
  }
  return 2.0 * total;
}

void require_hermitian_for_sampling(const TruncatedOperator& x) {
  double defect = hermiticity_defect(x.matrix());
  if (defect > 1e-10)
    throw NonHermitian("sample: W and Q grids need a Hermitian operator (defect " +
                           std::to_string(defect) + ")",
                       defect);
}

} // namespace

// PhaseGrid

PhaseGrid::PhaseGrid(double half_extent, double spacing, Complex center)
    : half_extent_(half_extent), spacing_(spacing), center_(center) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw InvalidArgument("PhaseGrid: spacing must be positive");
  if (!(half_extent >= spacing) || !std::isfinite(half_extent))
    throw InvalidArgument("PhaseGrid: half extent must be at least the spacing");
  count_ = static_cast<std::size_t>(std::floor(2.0 * half_extent / spacing + 1e-9)) + 1;
}

bool PhaseGrid::is_interior(std::size_t j, std::size_t k, double margin) const noexcept {
  double limit = half_extent_ - margin + 1e-12;
  return std::abs(offset(j)) <= limit && std::abs(offset(k)) <= limit;
}

std::string to_string(DistKind kind) {
  switch (kind) {
  case DistKind::P: return "P";
  case DistKind::W: return "W";
  case DistKind::Q: return "Q";
  }
  return "?";
}

DistKind dist_kind_from_string(const std::string& s) {
  if (s == "P" || s == "p") return DistKind::P;
  if (s == "W" || s == "w") return DistKind::W;
  if (s == "Q" || s == "q") return DistKind::Q;
  throw InvalidArgument("unknown distribution kind '" + s + "' (expected P, W or Q)");
}

// Point evaluations

Complex q_at(const TruncatedOperator& x, Complex alpha) {
  (void)coherent_state(alpha, x.dim()); // throws when alpha does not fit the cutoff
  Vector c = coherent_amplitudes(alpha, x.dim());
  Complex q = c.dot(x.matrix() * c);
  if (x.hermitian_hint() && std::abs(q.imag()) > 1e-10)
    throw NonHermitian("q_at: imaginary part for Hermitian operator", std::abs(q.imag()));
  return q;
}

Complex w_at(const TruncatedOperator& x, Complex alpha) {
  DisplacedParity pi = displaced_parity(alpha, x.dim());
  Complex w = (x.matrix() * pi.op.matrix()).trace();
  if (x.hermitian_hint() && std::abs(w.imag()) > 1e-10)
    throw NonHermitian("w_at: imaginary part for Hermitian operator", std::abs(w.imag()));
  return w;
}

CharacteristicFunction::CharacteristicFunction(const TruncatedOperator& x, const PhaseGrid& beta_grid,
                                               double boundary_tolerance)
    : grid_(beta_grid) {
  const std::size_t n = x.dim();
  const std::size_t count = grid_.points_per_axis();
  double r_max = 0.0;
  for (std::size_t j : {std::size_t{0}, count - 1})
    for (std::size_t k : {std::size_t{0}, count - 1}) r_max = std::max(r_max, std::abs(grid_.point(j, k)));
  const std::size_t padded = n + full_block_padding(r_max, n);

  // D(r e^{i theta}) = R(theta) exp(r (a^dagger - a)) R(theta)^dagger with R = e^{i theta n},
  // and exp(r (a^dagger - a)) = U e^{-i r lambda} U^dagger from H = i (a^dagger - a).
  Matrix a = annihilation_matrix(padded).matrix();
  Matrix h = Complex(0.0, 1.0) * (a.adjoint() - a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Matrix& u = eig.eigenvectors();

  // weights(d + n - 1, k) = sum_m X_{m, m+d} U_{m+d, k} conj(U_{m, k}), restricted to the cutoff.
  const auto bands = 2 * n - 1;
  Matrix weights = Matrix::Zero(idx(bands), idx(padded));
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      Complex xv = x(col, row); // X_{n m} pairs with D_{m n}
      if (xv == Complex{}) continue;
      auto d = static_cast<std::ptrdiff_t>(row) - static_cast<std::ptrdiff_t>(col);
      auto b = idx(static_cast<std::size_t>(d + static_cast<std::ptrdiff_t>(n) - 1));
      weights.row(b) += xv * u.row(idx(row)).cwiseProduct(u.row(idx(col)).conjugate());
    }
  }

  chi_ = Eigen::MatrixXcd::Zero(idx(count), idx(count));
  parallel_for(count, [&](std::size_t j) {
    Vector phases(idx(padded));
    for (std::size_t k = 0; k < count; ++k) {
      Complex beta = grid_.point(j, k);
      double r = std::abs(beta);
      double theta = r > 0.0 ? std::arg(beta) : 0.0;
      for (std::size_t q = 0; q < padded; ++q)
        phases(idx(q)) = std::polar(1.0, -r * lambda(idx(q)));
      Vector c = weights * phases;
      Complex sum{};
      for (std::size_t b = 0; b < bands; ++b) {
        double d = static_cast<double>(b) - static_cast<double>(n - 1);
        sum += std::polar(1.0, theta * d) * c(idx(b));
      }
      chi_(idx(j), idx(k)) = sum;
    }
  });

  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t k = 0; k < count; ++k)
      if (grid_.on_boundary(j, k)) boundary_max_ = std::max(boundary_max_, std::abs(chi_(idx(j), idx(k))));
  if (boundary_max_ > boundary_tolerance) {
    std::ostringstream os;
    os << "characteristic function reaches " << boundary_max_ << " on the grid boundary (tolerance "
       << boundary_tolerance << "); enlarge the beta grid";
    throw GridTooSmall(os.str(), boundary_max_);
  }
}

double CharacteristicFunction::wigner(Complex alpha) const {
  const std::size_t count = grid_.points_per_axis();
  Complex sum{};
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t k = 0; k < count; ++k) {
      Complex beta = grid_.point(j, k);
      double phase = 2.0 * (alpha * std::conj(beta)).imag();
      sum += chi_(idx(j), idx(k)) * std::polar(1.0, phase);
    }
  }
  double h = grid_.spacing();
  return (sum * (h * h / kPi)).real();
}

double w_char_at(const TruncatedOperator& x, Complex alpha, const PhaseGrid& beta_grid,
                 double boundary_tolerance) {
  return CharacteristicFunction(x, beta_grid, boundary_tolerance).wigner(alpha);
}

double p_thermal_at(double nbar, Complex alpha) {
  return p_gaussian_at(GaussianP{nbar, {}}, alpha);
}

double p_gaussian_at(const GaussianP& p, Complex alpha) {
  if (p.nbar == 0.0)
    throw SingularP("P distribution with nbar = 0 is a delta distribution, not a function");
  if (!(p.nbar > 0.0)) throw InvalidArgument("P distribution needs nbar > 0");
  return std::exp(-std::norm(alpha - p.center) / p.nbar) / p.nbar;
}

// Grid evaluation

QuasiDistribution sample(const TruncatedOperator& x, DistKind kind, const PhaseGrid& grid) {
  const std::size_t count = grid.points_per_axis();
  QuasiDistribution out{grid, kind, Eigen::MatrixXd::Zero(idx(count), idx(count)), x.label()};
  switch (kind) {
  case DistKind::P: {
    if (!x.closed_form_p())
      throw SingularP("P distribution of '" + x.label() +
                      "' has no closed form: for Fock states and general operators it is a series "
                      "of delta-function derivatives");
    GaussianP p = *x.closed_form_p();
    if (p.nbar <= 0.0) throw SingularP("P distribution of '" + x.label() + "' is a delta distribution");
    parallel_for(count, [&](std::size_t j) {
      for (std::size_t k = 0; k < count; ++k) out.values(idx(j), idx(k)) = p_gaussian_at(p, grid.point(j, k));
    });
    break;
  }
  case DistKind::Q: {
    require_hermitian_for_sampling(x);
    parallel_for(count, [&](std::size_t j) {
      Vector c(idx(x.dim()));
      for (std::size_t k = 0; k < count; ++k)
        out.values(idx(j), idx(k)) = husimi_value(x.matrix(), grid.point(j, k), c);
    });
    break;
  }
  case DistKind::W: {
    require_hermitian_for_sampling(x);
    parallel_for(count, [&](std::size_t j) {
      for (std::size_t k = 0; k < count; ++k)
        out.values(idx(j), idx(k)) = wigner_value(x.matrix(), grid.point(j, k));
    });
    break;
  }
  }
  return out;
}

QuasiDistribution sample(const DensityOperator& rho, DistKind kind, const PhaseGrid& grid) {
  QuasiDistribution out = sample(rho.op(), kind, grid);
  if (kind == DistKind::Q) {
    double lo = out.values.minCoeff();
    double hi = out.values.maxCoeff();
    if (lo < -1e-10 || hi > 1.0 + 1e-10) {
      std::ostringstream os;
      os << "Q of density operator '" << rho.label() << "' leaves [0, 1]: min " << lo << ", max " << hi;
      throw Error(os.str());
    }
  }
  return out;
}

QuasiDistribution weierstrass(const QuasiDistribution& dist, double t, double boundary_tolerance) {
  if (!(t > 0.0)) throw InvalidArgument("weierstrass: t must be positive");
  double edge = boundary_max(dist);
  if (edge > boundary_tolerance) {
    std::ostringstream os;
    os << "weierstrass: source reaches " << edge << " on the grid boundary (tolerance "
       << boundary_tolerance << ")";
    throw GridTooSmall(os.str(), edge);
  }
  const std::size_t count = dist.grid.points_per_axis();
  Eigen::MatrixXd kernel(idx(count), idx(count));
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < count; ++j) {
      double d = dist.grid.offset(i) - dist.grid.offset(j);
      kernel(idx(i), idx(j)) = std::exp(-d * d / t);
    }
  double h = dist.grid.spacing();
  Eigen::MatrixXd smoothed = (h * h / (kPi * t)) * (kernel * dist.values * kernel.transpose());

  DistKind kind = dist.kind;
  if (std::abs(t - 0.5) < 1e-15 && dist.kind == DistKind::P) kind = DistKind::W;
  else if (std::abs(t - 0.5) < 1e-15 && dist.kind == DistKind::W) kind = DistKind::Q;
  else if (std::abs(t - 1.0) < 1e-15 && dist.kind == DistKind::P) kind = DistKind::Q;
  std::ostringstream label;
  label << "weierstrass(" << dist.source_label << ", t=" << t << ")";
  return {dist.grid, kind, std::move(smoothed), label.str()};
}

double integrate(const QuasiDistribution& dist) {
  double h = dist.grid.spacing();
  return h * h / kPi * dist.values.sum();
}

Negativity negativity(const QuasiDistribution& dist) {
  double h = dist.grid.spacing();
  double volume = (-dist.values.array()).max(0.0).sum() * h * h / kPi;
  return {dist.values.minCoeff(), volume};
}

double boundary_max(const QuasiDistribution& dist) {
  const std::size_t count = dist.grid.points_per_axis();
  double best = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    best = std::max({best, std::abs(dist.values(0, idx(i))), std::abs(dist.values(idx(count - 1), idx(i))),
                     std::abs(dist.values(idx(i), 0)), std::abs(dist.values(idx(i), idx(count - 1)))});
  }
  return best;
}

double interior_max_deviation(const QuasiDistribution& a, const QuasiDistribution& b, double margin) {
  if (a.values.rows() != b.values.rows() || a.grid.spacing() != b.grid.spacing() ||
      a.grid.half_extent() != b.grid.half_extent() || a.grid.center() != b.grid.center())
    throw InvalidArgument("interior_max_deviation: distributions live on different grids");
  const std::size_t count = a.grid.points_per_axis();
  double worst = 0.0;
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t k = 0; k < count; ++k)
      if (a.grid.is_interior(j, k, margin))
        worst = std::max(worst, std::abs(a.values(idx(j), idx(k)) - b.values(idx(j), idx(k))));
  return worst;
}

std::string to_csv(const QuasiDistribution& dist) {
  std::string out = "re_alpha,im_alpha,value\n";
  const std::size_t count = dist.grid.points_per_axis();
  char buf[96];
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t k = 0; k < count; ++k) {
      Complex p = dist.grid.point(j, k);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.real(), p.imag(), dist.values(idx(j), idx(k)));
      out += buf;
    }
  return out;
}

Json to_json(const QuasiDistribution& dist) {
  Json j;
  j["kind"] = to_string(dist.kind);
  j["source_label"] = dist.source_label;
  j["grid"] = {{"center_re", dist.grid.center().real()},
               {"center_im", dist.grid.center().imag()},
               {"half_extent", dist.grid.half_extent()},
               {"spacing", dist.grid.spacing()},
               {"points_per_axis", dist.grid.points_per_axis()}};
  j["layout"] = "values[j][k] at alpha = center + (j*spacing - half_extent) + i*(k*spacing - half_extent)";
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < dist.values.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < dist.values.cols(); ++c) row.push_back(dist.values(r, c));
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  return j;
}

} // namespace quasiphase
