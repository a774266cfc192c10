#pragma once

// Classicality criteria based on preimages under the channel C, and the
// verification suite that exercises every identity between P, W, Q and C.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quasiphase/channels.hpp"
#include "quasiphase/fock.hpp"
#include "quasiphase/phasespace.hpp"
#include "quasiphase/serialize.hpp"

namespace quasiphase {

/// Minimum eigenvalue of (X + X^dagger)/2; throws NonHermitian above 1e-10 defect.
double psd_margin(const TruncatedOperator& x);

enum class Criterion {
  WignerSufficient, ///< order 1: W_rho = Q of C^{-1}(rho)
  PNegSufficient,   ///< order 2: P_rho = Q of C^{-2}(rho)
};
enum class Verdict { CertifiedClassical, Inconclusive };

std::string to_string(Criterion c);
std::string to_string(Verdict v);

struct ClassicalityReport {
  std::string state_label;
  Criterion criterion;
  double min_eigenvalue_of_inverse;
  double epsilon_used;
  /// Trace norm of C^order(Y) - rho for the returned preimage Y.
  double residual;
  Verdict verdict;
  /// Sum of |negative eigenvalues| of the preimage.
  double score;
  std::string diagnostics;
};

Json to_json(const ClassicalityReport& r);

/// Cached factorization of the regularized inverse of C at (dim, epsilon).
const RegularizedInverse& c_inverse(std::size_t dim, double epsilon);

/// C^{-order}(x) by repeated regularized solves; residual of the full round trip.
InverseResult c_preimage(const TruncatedOperator& x, int order, double epsilon);

ClassicalityReport classicality_check(const DensityOperator& rho, int order, double epsilon = 1e-10);

double nonclassicality_score(const DensityOperator& rho, int order, double epsilon = 1e-10);

struct ScorePoint {
  double epsilon;
  double score;
  double min_eigenvalue;
};
/// Scores over a ladder of epsilon values; no limit is taken.
std::vector<ScorePoint> score_ladder(const DensityOperator& rho, int order,
                                     const std::vector<double>& epsilons = {1e-6, 1e-8, 1e-10});

// Verification suite

struct BatteryMember {
  std::string name;
  DensityOperator rho;
};

/// vacuum, fock 1-3, coherent 0.5, 1.2, 0.8+0.6i, thermal 0.5, 1, 1.5, and a seeded
/// random rank-3 state on at most 10 photons.
std::vector<BatteryMember> default_battery(std::size_t dim, std::uint64_t seed);

/// Rank-3 mixture of complex Gaussian vectors on levels 0..max_photons, normalized.
DensityOperator random_density(std::size_t dim, std::size_t max_photons, std::size_t rank,
                               std::uint64_t seed);

struct SuiteConfig {
  std::size_t dim = 64;
  double grid_extent = 5.0;
  double grid_step = 0.05;
  std::uint64_t seed = 1;
  /// Check groups to run; empty runs all of prop1, c2, parity, amplifier, photon, image.
  std::vector<std::string> only;
  /// Tolerance overrides by tolerance name (see default_tolerances); "all" overrides every one.
  std::map<std::string, double> tolerances;
  /// Battery member names to keep; empty keeps the whole default battery.
  std::vector<std::string> battery;
};

const std::vector<std::string>& check_groups();
std::map<std::string, double> default_tolerances();

struct CheckResult {
  std::string group;
  std::string name;
  double deviation;
  double tolerance;
  bool pass;
  double runtime_seconds;
  std::string detail;
};

/// A printed formula compared with the law derived from the dilation.
struct Discrepancy {
  std::string law;
  std::string printed_formula;
  std::string derived_formula;
  double printed_residual;
  double derived_residual;
  std::string conclusion;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::vector<Discrepancy> discrepancies;
  bool passed() const;
};

VerificationReport verify_suite(const SuiteConfig& config = {});

/// Runtimes are left out unless requested, so reports are byte-identical across runs.
Json to_json(const VerificationReport& report, bool include_runtime = false);
std::string to_text_table(const VerificationReport& report);

} // namespace quasiphase
