#pragma once

// Quantum-limited amplifier and attenuator channels, their compositions, and
// a regularized inverse. Every channel here is phase covariant: it maps the
// k-th off-diagonal of an operator onto the k-th off-diagonal.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "quasiphase/fock.hpp"
#include "quasiphase/phasespace.hpp"
#include "quasiphase/serialize.hpp"

namespace quasiphase {

class ChannelSpec;

namespace channel {
struct Identity {};
struct Amplifier {
  double kappa; ///< >= 1
};
struct Attenuator {
  double lambda; ///< in [0, 1]
};
/// Applied right to left: items.back() acts first.
struct Compose {
  std::vector<ChannelSpec> items;
};
/// A_{E+1} o E_{1/(E+1)}.
struct AdditiveNoise {
  double noise; ///< E >= 0
};
struct Inverse {
  std::shared_ptr<const ChannelSpec> inner;
  double epsilon; ///< > 0
};
} // namespace channel

/// Declarative channel description; validated on construction.
class ChannelSpec {
public:
  using Node = std::variant<channel::Identity, channel::Amplifier, channel::Attenuator,
                            channel::Compose, channel::AdditiveNoise, channel::Inverse>;

  explicit ChannelSpec(Node node);

  static ChannelSpec identity();
  static ChannelSpec amplifier(double kappa);
  static ChannelSpec attenuator(double lambda);
  static ChannelSpec compose(std::vector<ChannelSpec> items);
  static ChannelSpec additive_noise(double noise);
  static ChannelSpec inverse(ChannelSpec inner, double epsilon = 1e-10);
  /// E_{1/2} o A_2.
  static ChannelSpec channel_c();

  const Node& node() const noexcept { return node_; }
  bool is_inverse() const noexcept { return std::holds_alternative<channel::Inverse>(node_); }
  std::string describe() const;

private:
  Node node_;
};

Json to_json(const ChannelSpec& spec);
ChannelSpec channel_from_json(const Json& j);

/// When an amplifier may enlarge the cutoff of its output.
enum class Growth {
  automatic, ///< grow only if the input is resolved within its cutoff (see is_resolved)
  always,
  never,
};

/// True when the last row and column of x are below 1e-8, i.e. x decays inside its cutoff.
/// Bounded operators such as the displaced parity are not resolved; growing their
/// amplified image would extrapolate entries the input does not contain.
bool is_resolved(const TruncatedOperator& x);

/// ceil(kappa * dim + 10).
std::size_t amplifier_output_dim(double kappa, std::size_t dim);
/// Cutoff that also holds the amplified image of the top input level:
/// amplifier_output_dim plus eight standard deviations of its photon number.
std::size_t amplifier_full_dim(double kappa, std::size_t dim);

/// Number-basis kernel of A_kappa. The leading x.dim() block of the output is exact
/// for any input; entries above it are exact when x is resolved. For resolved
/// inputs a trace deficit above 1e-8 raises TraceLeak.
TruncatedOperator amplifier_apply(double kappa, const TruncatedOperator& x, std::size_t dim_out);

/// Operator-sum representation with shift-structured Kraus operators.
struct KrausSet {
  std::size_t dim_in = 0;
  std::size_t dim_out = 0;
  std::vector<SparseMatrix> matrices;

  /// max |sum_j K_j^dagger K_j - I| on the low 75% block.
  double completeness_residual() const;
  TruncatedOperator apply(const TruncatedOperator& x) const;
};

KrausSet attenuator_kraus(double lambda, std::size_t dim);
TruncatedOperator attenuator_apply(double lambda, const TruncatedOperator& x);

/// Two-mode dilation oracles: unitary from the exponential of the two-mode
/// generator, ancilla in vacuum, partial trace over the ancilla. Raise
/// AncillaTail when the ancilla or the output mode reaches its cutoff.
/// dim_out = 0 selects amplifier_output_dim(kappa, x.dim()).
TruncatedOperator amplifier_dilated(double kappa, const TruncatedOperator& x, std::size_t anc_dim,
                                    std::size_t dim_out = 0);
TruncatedOperator attenuator_dilated(double lambda, const TruncatedOperator& x, std::size_t anc_dim);

/// Retry the dilation with larger ancilla and output cutoffs until the tails pass.
TruncatedOperator amplifier_dilated_auto(double kappa, const TruncatedOperator& x);
/// Ancilla one level above the input dimension: the beamsplitter conserves total photon number.
TruncatedOperator attenuator_dilated_auto(double lambda, const TruncatedOperator& x);

struct ApplyOptions {
  Growth growth = Growth::automatic;
  /// With Growth::always, size amplifier outputs by amplifier_full_dim.
  bool full_growth = false;
};

/// Dispatches to the closed-form realizations.
TruncatedOperator apply(const ChannelSpec& spec, const TruncatedOperator& x,
                        const ApplyOptions& options = {});

enum class C2Route {
  compose,    ///< C(C(X))
  reversed,   ///< A_2(E_{1/2}(X))
  projection, ///< int d^2alpha/pi |alpha><alpha| X |alpha><alpha|
};

std::string to_string(C2Route route);

/// Extent at which Q of x has dropped below threshold on the grid boundary.
double projection_extent(const TruncatedOperator& x, double threshold = 1e-13);

/// C^2 by one of three routes. The projection route integrates over `grid`
/// (chosen automatically when absent) and returns a dim_out operator
/// (default amplifier_output_dim(2, x.dim())).
TruncatedOperator c_squared(const TruncatedOperator& x, C2Route route,
                            std::optional<PhaseGrid> grid = std::nullopt,
                            std::optional<std::size_t> dim_out = std::nullopt);

/// Matrix acting on column-major vectorized dim x dim operators.
struct Superoperator {
  std::size_t dim = 0;
  Matrix matrix;

  TruncatedOperator apply(const TruncatedOperator& x) const;
};

/// Columns are the images of the matrix units E_mn, cropped to dim.
/// Amplifiers always grow internally, so this is the channel on operators supported below dim.
Superoperator superoperator_of(const ChannelSpec& spec, std::size_t dim);

struct InverseResult {
  TruncatedOperator op;
  double epsilon;
  /// Trace norm of apply(inner, Y) - X.
  double residual;
};

class IllConditionedInverse : public Error {
public:
  IllConditionedInverse(const std::string& what, InverseResult result)
      : Error(what), result_(std::move(result)) {}
  const InverseResult& result() const noexcept { return result_; }

private:
  InverseResult result_;
};

/// Tikhonov solution vec(Y) = (M^dagger M + eps I)^{-1} M^dagger vec(X), factorized once.
/// Solved as the stacked least-squares problem [M; sqrt(eps) I] y = [x; 0], blockwise
/// over Fock offsets when M is phase covariant.
class RegularizedInverse {
public:
  RegularizedInverse(Superoperator map, double epsilon);

  double epsilon() const noexcept { return epsilon_; }
  std::size_t dim() const noexcept { return map_.dim; }
  const Superoperator& map() const noexcept { return map_; }
  bool blockwise() const noexcept { return !blocks_.empty(); }

  /// Throws IllConditionedInverse when a residual bound is given and exceeded.
  InverseResult solve(const TruncatedOperator& x,
                      std::optional<double> residual_bound = std::nullopt) const;

private:
  struct Block {
    std::vector<Eigen::Index> indices;
    Eigen::HouseholderQR<Matrix> qr;
  };
  Superoperator map_;
  double epsilon_;
  std::vector<Block> blocks_;
  std::optional<Eigen::HouseholderQR<Matrix>> dense_;
};

InverseResult inverse_apply(const ChannelSpec& inner, const TruncatedOperator& x, double epsilon,
                            std::optional<double> residual_bound = std::nullopt);

} // namespace quasiphase
