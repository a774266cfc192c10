#include "quasiphase/channels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "quasiphase/parallel.hpp"

namespace quasiphase {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// log(k!) for k = 0 .. n.
std::vector<double> log_factorials(std::size_t n) {
  std::vector<double> lf(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
  return lf;
}

double log_binomial(const std::vector<double>& lf, std::size_t n, std::size_t k) {
  return lf[n] - lf[k] - lf[n - k];
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

// Trace norm of a general square matrix.
double trace_norm(const Matrix& m) {
  if (hermiticity_defect(m) <= 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    return hermitian_trace_norm(m);
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

std::string child_label(const std::string& channel, const TruncatedOperator& x) {
  return channel + "(" + (x.label().empty() ? std::string("X") : x.label()) + ")";
}

} // namespace

// ChannelSpec

ChannelSpec::ChannelSpec(Node node) : node_(std::move(node)) {
  std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, channel::Amplifier>) {
          require_finite(n.kappa, "kappa");
          if (n.kappa < 1.0) throw InvalidArgument("amplifier gain kappa must be >= 1");
        } else if constexpr (std::is_same_v<T, channel::Attenuator>) {
          require_finite(n.lambda, "lambda");
          if (n.lambda < 0.0 || n.lambda > 1.0)
            throw InvalidArgument("attenuator transmissivity lambda must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, channel::Compose>) {
          if (n.items.empty()) throw InvalidArgument("compose needs at least one channel");
        } else if constexpr (std::is_same_v<T, channel::AdditiveNoise>) {
          require_finite(n.noise, "noise");
          if (n.noise < 0.0) throw InvalidArgument("additive noise E must be >= 0");
        } else if constexpr (std::is_same_v<T, channel::Inverse>) {
          require_finite(n.epsilon, "epsilon");
          if (!n.inner) throw InvalidArgument("inverse needs an inner channel");
          if (n.epsilon <= 0.0) throw InvalidArgument("regularization epsilon must be > 0");
        }
      },
      node_);
}

ChannelSpec ChannelSpec::identity() { return ChannelSpec(channel::Identity{}); }
ChannelSpec ChannelSpec::amplifier(double kappa) { return ChannelSpec(channel::Amplifier{kappa}); }
ChannelSpec ChannelSpec::attenuator(double lambda) {
  return ChannelSpec(channel::Attenuator{lambda});
}
ChannelSpec ChannelSpec::compose(std::vector<ChannelSpec> items) {
  return ChannelSpec(channel::Compose{std::move(items)});
}
ChannelSpec ChannelSpec::additive_noise(double noise) {
  return ChannelSpec(channel::AdditiveNoise{noise});
}
ChannelSpec ChannelSpec::inverse(ChannelSpec inner, double epsilon) {
  return ChannelSpec(
      channel::Inverse{std::make_shared<const ChannelSpec>(std::move(inner)), epsilon});
}
ChannelSpec ChannelSpec::channel_c() { return compose({attenuator(0.5), amplifier(2.0)}); }

std::string ChannelSpec::describe() const {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, channel::Identity>) {
          return "id";
        } else if constexpr (std::is_same_v<T, channel::Amplifier>) {
          return "A_" + format_number(n.kappa);
        } else if constexpr (std::is_same_v<T, channel::Attenuator>) {
          return "E_" + format_number(n.lambda);
        } else if constexpr (std::is_same_v<T, channel::Compose>) {
          std::string s;
          for (std::size_t i = 0; i < n.items.size(); ++i) {
            if (i) s += " o ";
            s += n.items[i].describe();
          }
          return "(" + s + ")";
        } else if constexpr (std::is_same_v<T, channel::AdditiveNoise>) {
          return "N_" + format_number(n.noise);
        } else {
          return "inv[" + n.inner->describe() + ", eps=" + format_number(n.epsilon) + "]";
        }
      },
      node_);
}

Json to_json(const ChannelSpec& spec) {
  return std::visit(
      [](const auto& n) -> Json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, channel::Identity>) {
          return Json{{"kind", "identity"}};
        } else if constexpr (std::is_same_v<T, channel::Amplifier>) {
          return Json{{"kind", "amplifier"}, {"kappa", n.kappa}};
        } else if constexpr (std::is_same_v<T, channel::Attenuator>) {
          return Json{{"kind", "attenuator"}, {"lambda", n.lambda}};
        } else if constexpr (std::is_same_v<T, channel::Compose>) {
          Json items = Json::array();
          for (const auto& item : n.items) items.push_back(to_json(item));
          return Json{{"kind", "compose"}, {"items", items}};
        } else if constexpr (std::is_same_v<T, channel::AdditiveNoise>) {
          return Json{{"kind", "additive_noise"}, {"noise", n.noise}};
        } else {
          return Json{{"kind", "inverse"}, {"inner", to_json(*n.inner)}, {"epsilon", n.epsilon}};
        }
      },
      spec.node());
}

namespace {

double number_field(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw InvalidArgument(std::string("channel: missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

} // namespace

ChannelSpec channel_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw InvalidArgument("channel: expected an object with a string 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return ChannelSpec::identity();
  if (kind == "amplifier") return ChannelSpec::amplifier(number_field(j, "kappa"));
  if (kind == "attenuator") return ChannelSpec::attenuator(number_field(j, "lambda"));
  if (kind == "additive_noise") return ChannelSpec::additive_noise(number_field(j, "noise"));
  if (kind == "compose") {
    if (!j.contains("items") || !j.at("items").is_array())
      throw InvalidArgument("channel: compose needs an 'items' array");
    std::vector<ChannelSpec> items;
    for (const auto& item : j.at("items")) items.push_back(channel_from_json(item));
    return ChannelSpec::compose(std::move(items));
  }
  if (kind == "inverse") {
    if (!j.contains("inner")) throw InvalidArgument("channel: inverse needs 'inner'");
    double eps = j.contains("epsilon") ? number_field(j, "epsilon") : 1e-10;
    return ChannelSpec::inverse(channel_from_json(j.at("inner")), eps);
  }
  throw InvalidArgument("channel: unknown kind '" + kind + "'");
}

// Amplifier

bool is_resolved(const TruncatedOperator& x) { return edge_magnitude(x) <= 1e-8; }

std::size_t amplifier_output_dim(double kappa, std::size_t dim) {
  return static_cast<std::size_t>(std::ceil(kappa * static_cast<double>(dim) + 10.0));
}

std::size_t amplifier_full_dim(double kappa, std::size_t dim) {
  double n = static_cast<double>(dim);
  return amplifier_output_dim(kappa, dim) +
         static_cast<std::size_t>(std::ceil(8.0 * std::sqrt(n * kappa * (kappa - 1.0))));
}

TruncatedOperator amplifier_apply(double kappa, const TruncatedOperator& x, std::size_t dim_out) {
  (void)ChannelSpec::amplifier(kappa);
  if (dim_out == 0) throw InvalidDimension("amplifier: dim_out must be positive");
  std::string label = child_label("A_" + format_number(kappa), x);
  if (kappa == 1.0) {
    return TruncatedOperator(resized(x.matrix(), dim_out), label, x.hermitian_hint())
        .with_closed_form_p(x.closed_form_p());
  }

  const std::size_t n_in = std::min(x.dim(), dim_out);
  const Matrix& xm = x.matrix();
  struct Entry {
    std::size_t m, n;
    Complex value;
  };
  std::vector<Entry> entries;
  for (std::size_t n = 0; n < n_in; ++n)
    for (std::size_t m = 0; m < n_in; ++m)
      if (xm(idx(m), idx(n)) != Complex(0.0)) entries.push_back({m, n, xm(idx(m), idx(n))});

  const auto lf = log_factorials(dim_out + n_in);
  const double log_kappa = std::log(kappa);
  const double log_q = std::log((kappa - 1.0) / kappa);
  const double q = (kappa - 1.0) / kappa;
  std::vector<double> amp(n_in);
  Matrix y = Matrix::Zero(idx(dim_out), idx(dim_out));

  // Output entry (j+m, j+n) receives a_m(j) a_n(j) X_mn with
  // a_m(j) = sqrt(C(j+m, j)) kappa^{-(m+1)/2} q^{j/2}.
  for (std::size_t j = 0; j < dim_out; ++j) {
    for (std::size_t m = 0; m < n_in && j + m < dim_out; ++m)
      amp[m] = std::exp(0.5 * (log_binomial(lf, j + m, j) - (static_cast<double>(m) + 1.0) * log_kappa +
                               static_cast<double>(j) * log_q));
    double shell = 0.0;
    for (const auto& e : entries) {
      if (j + e.m >= dim_out || j + e.n >= dim_out) continue;
      Complex term = amp[e.m] * amp[e.n] * e.value;
      y(idx(j + e.m), idx(j + e.n)) += term;
      shell = std::max(shell, std::abs(term));
    }
    bool decreasing = q * static_cast<double>(j + n_in) / static_cast<double>(j + 1) < 1.0;
    if (decreasing && shell < 1e-16) break;
  }

  TruncatedOperator out(std::move(y), label, x.hermitian_hint());
  if (is_resolved(x)) {
    double deficit = std::abs(x.trace() - out.trace());
    if (deficit > 1e-8) {
      std::size_t suggested = std::max(amplifier_full_dim(kappa, x.dim()), 2 * dim_out);
      throw TraceLeak("amplifier: output cutoff " + std::to_string(dim_out) + " loses trace " +
                          format_number(deficit) + "; try " + std::to_string(suggested),
                      deficit, suggested);
    }
  }
  if (x.closed_form_p()) {
    // A_kappa maps P(alpha) to the Gaussian-smoothed, rescaled P of a displaced thermal state.
    const GaussianP& p = *x.closed_form_p();
    out = out.with_closed_form_p(
        GaussianP{kappa * p.nbar + (kappa - 1.0), std::sqrt(kappa) * p.center});
  }
  return out;
}

// Attenuator

KrausSet attenuator_kraus(double lambda, std::size_t dim) {
  (void)ChannelSpec::attenuator(lambda);
  if (dim == 0) throw InvalidDimension("attenuator: dim must be positive");
  const auto lf = log_factorials(dim);
  KrausSet set;
  set.dim_in = dim;
  set.dim_out = dim;
  // K_j |n> = sqrt(C(n, j)) lambda^{(n-j)/2} (1-lambda)^{j/2} |n-j>
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (std::size_t n = j; n < dim; ++n) {
      double c = std::exp(0.5 * log_binomial(lf, n, j)) *
                 std::pow(lambda, 0.5 * static_cast<double>(n - j)) *
                 std::pow(1.0 - lambda, 0.5 * static_cast<double>(j));
      if (c != 0.0) triplets.emplace_back(idx(n - j), idx(n), c);
    }
    if (triplets.empty()) continue;
    SparseMatrix k(idx(dim), idx(dim));
    k.setFromTriplets(triplets.begin(), triplets.end());
    set.matrices.push_back(std::move(k));
  }
  return set;
}

double KrausSet::completeness_residual() const {
  Matrix sum = Matrix::Zero(idx(dim_in), idx(dim_in));
  for (const auto& k : matrices) sum += Matrix(SparseMatrix(k.adjoint()) * k);
  auto low = idx(std::max<std::size_t>(1, (3 * dim_in) / 4));
  Matrix defect = sum.topLeftCorner(low, low) - Matrix::Identity(low, low);
  return defect.cwiseAbs().maxCoeff();
}

TruncatedOperator KrausSet::apply(const TruncatedOperator& x) const {
  if (x.dim() != dim_in)
    throw InvalidDimension("kraus: operator dim " + std::to_string(x.dim()) + " != " +
                           std::to_string(dim_in));
  Matrix out = Matrix::Zero(idx(dim_out), idx(dim_out));
  for (const auto& k : matrices) {
    Matrix kx = k * x.matrix();
    out += kx * SparseMatrix(k.adjoint());
  }
  return TruncatedOperator(std::move(out), x.label(), x.hermitian_hint());
}

TruncatedOperator attenuator_apply(double lambda, const TruncatedOperator& x) {
  (void)ChannelSpec::attenuator(lambda);
  std::string label = child_label("E_" + format_number(lambda), x);
  const std::size_t n = x.dim();
  const Matrix& xm = x.matrix();

  // a(p, j) = sqrt(C(p+j, j)) lambda^{p/2} (1-lambda)^{j/2}; output (p, q) sums
  // a(p, j) a(q, j) X_{p+j, q+j} over j along each diagonal band.
  const auto lf = log_factorials(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(idx(n), idx(n));
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t j = 0; p + j < n; ++j)
      a(idx(p), idx(j)) = std::exp(0.5 * log_binomial(lf, p + j, j)) *
                          std::pow(lambda, 0.5 * static_cast<double>(p)) *
                          std::pow(1.0 - lambda, 0.5 * static_cast<double>(j));

  Matrix y = Matrix::Zero(idx(n), idx(n));
  for (std::size_t band = 0; band < 2 * n - 1; ++band) {
    // offset d = col - row, ranging over -(n-1) .. n-1
    long d = static_cast<long>(band) - static_cast<long>(n - 1);
    std::size_t r0 = d < 0 ? static_cast<std::size_t>(-d) : 0;
    std::size_t c0 = d < 0 ? 0 : static_cast<std::size_t>(d);
    std::size_t len = n - (r0 + c0);
    bool any = false;
    for (std::size_t t = 0; t < len && !any; ++t) any = xm(idx(r0 + t), idx(c0 + t)) != Complex(0.0);
    if (!any) continue;
    for (std::size_t t = 0; t < len; ++t) {
      std::size_t p = r0 + t, q = c0 + t;
      Complex acc = 0.0;
      for (std::size_t j = 0; t + j < len; ++j) {
        Complex v = xm(idx(p + j), idx(q + j));
        if (v != Complex(0.0)) acc += a(idx(p), idx(j)) * a(idx(q), idx(j)) * v;
      }
      y(idx(p), idx(q)) = acc;
    }
  }
  TruncatedOperator out(std::move(y), label, x.hermitian_hint());
  if (x.closed_form_p()) {
    const GaussianP& p = *x.closed_form_p();
    if (lambda > 0.0)
      out = out.with_closed_form_p(GaussianP{lambda * p.nbar, std::sqrt(lambda) * p.center});
  }
  return out;
}

// Dilations

namespace {

// Reduced output sum_b M_b X M_b^dagger, where column i of M_b is the ancilla-b
// slice of U|i, 0>. Returns the output and the input-weighted ancilla and output-mode tails.
struct Reduced {
  Matrix out;
  double ancilla_tail;
  double output_tail;
};

Reduced reduce_dilation(const BlockExponential& u, const Matrix& x, std::size_t d1, std::size_t d2) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  std::vector<Vector> columns(n);
  for (std::size_t i = 0; i < n; ++i) columns[i] = u.column(i * d2);
  Reduced r{Matrix::Zero(idx(d1), idx(d1)), 0.0, 0.0};
  for (std::size_t b = 0; b < d2; ++b) {
    Matrix mb(idx(d1), idx(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d1; ++k) mb(idx(k), idx(i)) = columns[i](idx(k * d2 + b));
    r.out += mb * x * mb.adjoint();
  }
  for (std::size_t i = 0; i < n; ++i) {
    double w = std::abs(x(idx(i), idx(i)));
    if (w == 0.0) continue;
    double anc = 0.0, mode = 0.0;
    for (std::size_t k = 0; k < d1; ++k) anc += std::norm(columns[i](idx(k * d2 + d2 - 1)));
    for (std::size_t b = 0; b < d2; ++b) mode += std::norm(columns[i](idx((d1 - 1) * d2 + b)));
    r.ancilla_tail += w * anc;
    r.output_tail += w * mode;
  }
  return r;
}

} // namespace

TruncatedOperator amplifier_dilated(double kappa, const TruncatedOperator& x, std::size_t anc_dim,
                                    std::size_t dim_out) {
  (void)ChannelSpec::amplifier(kappa);
  if (anc_dim < 2) throw InvalidDimension("amplifier dilation: ancilla dim must be >= 2");
  if (dim_out == 0) dim_out = amplifier_output_dim(kappa, x.dim());
  if (dim_out < x.dim()) throw InvalidDimension("amplifier dilation: dim_out below input dim");
  const std::size_t d1 = dim_out, d2 = anc_dim;
  // r (a^dagger b^dagger - a b), cosh^2 r = kappa
  const double r = std::acosh(std::sqrt(kappa));
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (std::size_t i = 0; i + 1 < d1; ++i)
    for (std::size_t b = 0; b + 1 < d2; ++b) {
      double c = r * std::sqrt(static_cast<double>((i + 1) * (b + 1)));
      triplets.emplace_back(idx((i + 1) * d2 + b + 1), idx(i * d2 + b), c);
      triplets.emplace_back(idx(i * d2 + b), idx((i + 1) * d2 + b + 1), -c);
    }
  SparseMatrix g(idx(d1 * d2), idx(d1 * d2));
  g.setFromTriplets(triplets.begin(), triplets.end());
  BlockExponential u(g);
  Reduced red = reduce_dilation(u, x.matrix(), d1, d2);
  if (red.ancilla_tail > 1e-8)
    throw AncillaTail("amplifier dilation: ancilla tail " + format_number(red.ancilla_tail) +
                          " at ancilla dim " + std::to_string(d2),
                      red.ancilla_tail);
  if (red.output_tail > 1e-8)
    throw AncillaTail("amplifier dilation: output tail " + format_number(red.output_tail) +
                          " at output dim " + std::to_string(d1),
                      red.output_tail);
  if (x.hermitian_hint()) red.out = 0.5 * (red.out + red.out.adjoint()).eval();
  return TruncatedOperator(std::move(red.out), child_label("A_" + format_number(kappa), x),
                           x.hermitian_hint());
}

TruncatedOperator attenuator_dilated(double lambda, const TruncatedOperator& x, std::size_t anc_dim) {
  (void)ChannelSpec::attenuator(lambda);
  if (anc_dim < 2) throw InvalidDimension("attenuator dilation: ancilla dim must be >= 2");
  const std::size_t d1 = x.dim(), d2 = anc_dim;
  // theta (a^dagger b - a b^dagger), cos^2 theta = lambda
  const double theta = std::acos(std::sqrt(lambda));
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (std::size_t i = 0; i + 1 < d1; ++i)
    for (std::size_t b = 1; b < d2; ++b) {
      double c = theta * std::sqrt(static_cast<double>((i + 1) * b));
      triplets.emplace_back(idx((i + 1) * d2 + b - 1), idx(i * d2 + b), c);
      triplets.emplace_back(idx(i * d2 + b), idx((i + 1) * d2 + b - 1), -c);
    }
  SparseMatrix g(idx(d1 * d2), idx(d1 * d2));
  g.setFromTriplets(triplets.begin(), triplets.end());
  BlockExponential u(g);
  Reduced red = reduce_dilation(u, x.matrix(), d1, d2);
  if (red.ancilla_tail > 1e-8)
    throw AncillaTail("attenuator dilation: ancilla tail " + format_number(red.ancilla_tail) +
                          " at ancilla dim " + std::to_string(d2),
                      red.ancilla_tail);
  if (x.hermitian_hint()) red.out = 0.5 * (red.out + red.out.adjoint()).eval();
  return TruncatedOperator(std::move(red.out), child_label("E_" + format_number(lambda), x),
                           x.hermitian_hint());
}

TruncatedOperator amplifier_dilated_auto(double kappa, const TruncatedOperator& x) {
  std::size_t anc = 32;
  std::size_t out = std::max<std::size_t>(32, amplifier_output_dim(kappa, x.dim()));
  for (int attempt = 0;; ++attempt) {
    try {
      return amplifier_dilated(kappa, x, anc, out);
    } catch (const AncillaTail&) {
      if (attempt == 6) throw;
      anc += anc / 2;
      out += out / 2;
    }
  }
}

TruncatedOperator attenuator_dilated_auto(double lambda, const TruncatedOperator& x) {
  return attenuator_dilated(lambda, x, x.dim() + 1);
}

// Dispatch

namespace {

std::size_t amplifier_dim_for(double kappa, const TruncatedOperator& x, const ApplyOptions& opt) {
  switch (opt.growth) {
  case Growth::never:
    return x.dim();
  case Growth::always:
    return opt.full_growth ? amplifier_full_dim(kappa, x.dim()) : amplifier_output_dim(kappa, x.dim());
  case Growth::automatic:
    break;
  }
  return is_resolved(x) ? amplifier_output_dim(kappa, x.dim()) : x.dim();
}

// Enlarges a growing amplifier output until the trace deficit is negligible.
TruncatedOperator amplify(double kappa, const TruncatedOperator& x, const ApplyOptions& opt) {
  std::size_t d = amplifier_dim_for(kappa, x, opt);
  if (d == x.dim() || !is_resolved(x)) return amplifier_apply(kappa, x, d);
  for (int attempt = 0;; ++attempt) {
    try {
      TruncatedOperator out = amplifier_apply(kappa, x, d);
      if (attempt == 4 || std::abs(x.trace() - out.trace()) <= 1e-12) return out;
    } catch (const TraceLeak&) {
      if (attempt == 4) throw;
    }
    d = std::max(amplifier_full_dim(kappa, x.dim()), d + d / 2);
  }
}

} // namespace

TruncatedOperator apply(const ChannelSpec& spec, const TruncatedOperator& x,
                        const ApplyOptions& options) {
  return std::visit(
      [&](const auto& n) -> TruncatedOperator {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, channel::Identity>) {
          return x;
        } else if constexpr (std::is_same_v<T, channel::Amplifier>) {
          return amplify(n.kappa, x, options);
        } else if constexpr (std::is_same_v<T, channel::Attenuator>) {
          return attenuator_apply(n.lambda, x);
        } else if constexpr (std::is_same_v<T, channel::Compose>) {
          TruncatedOperator current = x;
          for (auto it = n.items.rbegin(); it != n.items.rend(); ++it)
            current = apply(*it, current, options);
          return current;
        } else if constexpr (std::is_same_v<T, channel::AdditiveNoise>) {
          double k = n.noise + 1.0;
          TruncatedOperator attenuated = attenuator_apply(1.0 / k, x);
          return amplify(k, attenuated, options);
        } else {
          return inverse_apply(*n.inner, x, n.epsilon).op;
        }
      },
      spec.node());
}

// C^2

std::string to_string(C2Route route) {
  switch (route) {
  case C2Route::compose:
    return "compose";
  case C2Route::reversed:
    return "reversed";
  case C2Route::projection:
    return "projection";
  }
  return "?";
}

double projection_extent(const TruncatedOperator& x, double threshold) {
  const double cap = 2.0 * std::sqrt(static_cast<double>(x.dim())) + 5.0;
  for (double r = 3.0;; r += 0.5) {
    double worst = 0.0;
    const int steps = static_cast<int>(std::ceil(8.0 * r / 0.25));
    for (int s = 0; s < steps; ++s) {
      // walk the square boundary of half-width r
      double t = 8.0 * r * s / steps;
      Complex alpha;
      if (t < 2 * r) alpha = {-r + t, -r};
      else if (t < 4 * r) alpha = {r, -r + (t - 2 * r)};
      else if (t < 6 * r) alpha = {r - (t - 4 * r), r};
      else alpha = {-r, r - (t - 6 * r)};
      Vector c = coherent_amplitudes(alpha, x.dim());
      worst = std::max(worst, std::abs(c.dot(x.matrix() * c)));
    }
    if (worst < threshold) return r;
    if (r + 0.5 > cap)
      throw GridTooSmall("projection: Q does not decay inside the cutoff (|Q| = " +
                             format_number(worst) + " at extent " + format_number(r) + ")",
                         worst);
  }
}

TruncatedOperator c_squared(const TruncatedOperator& x, C2Route route, std::optional<PhaseGrid> grid,
                            std::optional<std::size_t> dim_out) {
  switch (route) {
  case C2Route::compose: {
    ChannelSpec c = ChannelSpec::channel_c();
    return apply(c, apply(c, x)).with_label(child_label("C^2", x));
  }
  case C2Route::reversed: {
    TruncatedOperator e = attenuator_apply(0.5, x);
    return amplify(2.0, e, ApplyOptions{}).with_label(child_label("C^2", x));
  }
  case C2Route::projection:
    break;
  }
  const std::size_t d = dim_out.value_or(amplifier_output_dim(2.0, x.dim()));
  PhaseGrid g = grid ? *grid : PhaseGrid(projection_extent(x), 0.15);
  const std::size_t count = g.points_per_axis();
  const std::size_t points = count * count;
  const double weight = g.spacing() * g.spacing() / M_PI;
  Matrix c_out(idx(d), idx(points));
  Vector w(idx(points));
  double boundary = 0.0;
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t k = 0; k < count; ++k) {
      Complex alpha = g.point(j, k);
      std::size_t p = j * count + k;
      Vector c = coherent_amplitudes(alpha, x.dim());
      Complex q = c.dot(x.matrix() * c);
      if (g.on_boundary(j, k)) boundary = std::max(boundary, std::abs(q));
      c_out.col(idx(p)) = coherent_amplitudes(alpha, d);
      w(idx(p)) = weight * q;
    }
  if (boundary > 1e-10)
    throw GridTooSmall("projection: |Q| = " + format_number(boundary) + " on the grid boundary",
                       boundary);
  Matrix out = (c_out * w.asDiagonal()) * c_out.adjoint();
  if (x.hermitian_hint()) out = 0.5 * (out + out.adjoint()).eval();
  return TruncatedOperator(std::move(out), child_label("C^2", x), x.hermitian_hint());
}

// Superoperators

TruncatedOperator Superoperator::apply(const TruncatedOperator& x) const {
  if (x.dim() != dim)
    throw InvalidDimension("superoperator: operator dim " + std::to_string(x.dim()) + " != " +
                           std::to_string(dim));
  Vector v = Eigen::Map<const Vector>(x.matrix().data(), idx(dim * dim));
  Vector out = matrix * v;
  return TruncatedOperator(Eigen::Map<const Matrix>(out.data(), idx(dim), idx(dim)), x.label(),
                           false);
}

Superoperator superoperator_of(const ChannelSpec& spec, std::size_t dim) {
  if (dim == 0) throw InvalidDimension("superoperator: dim must be positive");
  if (dim > 64) throw InvalidDimension("superoperator: dim above 64 is not supported (N^4 storage)");
  if (spec.is_inverse()) throw InvalidArgument("superoperator: inverse channels have no superoperator");
  Superoperator s{dim, Matrix::Zero(idx(dim * dim), idx(dim * dim))};
  ApplyOptions opt{Growth::always, true};
  parallel_for(dim * dim, [&](std::size_t k) {
      const std::size_t m = k % dim, n = k / dim;
      Matrix unit = Matrix::Zero(idx(dim), idx(dim));
      unit(idx(m), idx(n)) = 1.0;
      TruncatedOperator image = apply(spec, TruncatedOperator(std::move(unit)), opt);
      Matrix cropped = resized(image.matrix(), dim);
      s.matrix.col(idx(k)) = Eigen::Map<const Vector>(cropped.data(), idx(dim * dim));
  });
  return s;
}

// Regularized inverse

RegularizedInverse::RegularizedInverse(Superoperator map, double epsilon)
    : map_(std::move(map)), epsilon_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw InvalidArgument("inverse: epsilon must be positive");
  const std::size_t n = map_.dim;
  const std::size_t nn = n * n;
  auto offset = [n](std::size_t k) {
    return static_cast<long>(k / n) - static_cast<long>(k % n);
  };
  bool covariant = true;
  for (std::size_t col = 0; col < nn && covariant; ++col)
    for (std::size_t row = 0; row < nn; ++row)
      if (offset(row) != offset(col) && map_.matrix(idx(row), idx(col)) != Complex(0.0)) {
        covariant = false;
        break;
      }
  const double root = std::sqrt(epsilon);
  auto factor = [&](const std::vector<Eigen::Index>& indices) {
    const auto len = static_cast<Eigen::Index>(indices.size());
    Matrix stacked = Matrix::Zero(2 * len, len);
    for (Eigen::Index c = 0; c < len; ++c)
      for (Eigen::Index r = 0; r < len; ++r)
        stacked(r, c) = map_.matrix(indices[static_cast<std::size_t>(r)],
                                    indices[static_cast<std::size_t>(c)]);
    stacked.bottomRows(len).diagonal().setConstant(root);
    return Eigen::HouseholderQR<Matrix>(stacked);
  };
  if (covariant) {
    for (long d = -static_cast<long>(n) + 1; d < static_cast<long>(n); ++d) {
      std::vector<Eigen::Index> indices;
      for (std::size_t k = 0; k < nn; ++k)
        if (offset(k) == d) indices.push_back(idx(k));
      Eigen::HouseholderQR<Matrix> qr = factor(indices);
      blocks_.push_back(Block{std::move(indices), std::move(qr)});
    }
  } else {
    std::vector<Eigen::Index> all(nn);
    for (std::size_t k = 0; k < nn; ++k) all[k] = idx(k);
    dense_ = factor(all);
  }
}

InverseResult RegularizedInverse::solve(const TruncatedOperator& x,
                                        std::optional<double> residual_bound) const {
  const std::size_t n = map_.dim;
  if (x.dim() != n)
    throw InvalidDimension("inverse: operator dim " + std::to_string(x.dim()) + " != " +
                           std::to_string(n));
  const Eigen::Index nn = idx(n * n);
  Vector rhs = Eigen::Map<const Vector>(x.matrix().data(), nn);
  Vector y = Vector::Zero(nn);
  if (dense_) {
    Vector stacked = Vector::Zero(2 * nn);
    stacked.head(nn) = rhs;
    y = dense_->solve(stacked);
  } else {
    for (const auto& block : blocks_) {
      const auto len = static_cast<Eigen::Index>(block.indices.size());
      Vector stacked = Vector::Zero(2 * len);
      for (Eigen::Index i = 0; i < len; ++i) stacked(i) = rhs(block.indices[static_cast<std::size_t>(i)]);
      Vector sol = block.qr.solve(stacked);
      for (Eigen::Index i = 0; i < len; ++i) y(block.indices[static_cast<std::size_t>(i)]) = sol(i);
    }
  }
  Matrix ym = Eigen::Map<const Matrix>(y.data(), idx(n), idx(n));
  if (x.hermitian_hint()) ym = 0.5 * (ym + ym.adjoint()).eval();
  Vector yv = Eigen::Map<const Vector>(ym.data(), nn);
  Vector diff = map_.matrix * yv - rhs;
  double residual = trace_norm(Eigen::Map<const Matrix>(diff.data(), idx(n), idx(n)));
  InverseResult result{TruncatedOperator(std::move(ym), child_label("inv", x), x.hermitian_hint()),
                       epsilon_, residual};
  if (residual_bound && residual > *residual_bound)
    throw IllConditionedInverse("inverse: residual " + format_number(residual) +
                                    " exceeds bound " + format_number(*residual_bound),
                                std::move(result));
  return result;
}

InverseResult inverse_apply(const ChannelSpec& inner, const TruncatedOperator& x, double epsilon,
                            std::optional<double> residual_bound) {
  RegularizedInverse inv(superoperator_of(inner, x.dim()), epsilon);
  return inv.solve(x, residual_bound);
}

} // namespace quasiphase
