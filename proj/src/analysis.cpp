#include "quasiphase/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>

namespace quasiphase {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double negative_part(const Eigen::VectorXd& eig) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    if (eig(i) < 0.0) s -= eig(i);
  return s;
}

} // namespace

double psd_margin(const TruncatedOperator& x) {
  double defect = hermiticity_defect(x.matrix());
  if (defect > 1e-10) throw NonHermitian("psd_margin: operator is not Hermitian", defect);
  return hermitian_eigenvalues(x.matrix()).minCoeff();
}

std::string to_string(Criterion c) {
  return c == Criterion::WignerSufficient ? "WignerSufficient" : "PNegSufficient";
}

std::string to_string(Verdict v) {
  return v == Verdict::CertifiedClassical ? "CertifiedClassical" : "Inconclusive";
}

Json to_json(const ClassicalityReport& r) {
  return Json{{"state_label", r.state_label},
              {"criterion", to_string(r.criterion)},
              {"min_eigenvalue_of_inverse", r.min_eigenvalue_of_inverse},
              {"epsilon_used", r.epsilon_used},
              {"residual", r.residual},
              {"verdict", to_string(r.verdict)},
              {"score", r.score},
              {"diagnostics", r.diagnostics}};
}

const RegularizedInverse& c_inverse(std::size_t dim, double epsilon) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, double>, std::unique_ptr<RegularizedInverse>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{dim, epsilon}];
  if (!slot)
    slot = std::make_unique<RegularizedInverse>(superoperator_of(ChannelSpec::channel_c(), dim),
                                                epsilon);
  return *slot;
}

InverseResult c_preimage(const TruncatedOperator& x, int order, double epsilon) {
  if (order != 1 && order != 2) throw InvalidArgument("preimage order must be 1 or 2");
  const RegularizedInverse& inv = c_inverse(x.dim(), epsilon);
  InverseResult r = inv.solve(x);
  if (order == 2) {
    r = inv.solve(r.op);
    TruncatedOperator back = inv.map().apply(inv.map().apply(r.op));
    Matrix diff = back.matrix() - x.matrix();
    r.residual = hermitian_trace_norm(diff);
    if (hermiticity_defect(diff) > 1e-12) r.residual = Eigen::BDCSVD<Matrix>(diff).singularValues().sum();
  }
  return r;
}

ClassicalityReport classicality_check(const DensityOperator& rho, int order, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("classicality_check: epsilon must be positive");
  ClassicalityReport report{rho.label(),
                            order == 1 ? Criterion::WignerSufficient : Criterion::PNegSufficient,
                            0.0, epsilon, 0.0, Verdict::Inconclusive, 0.0, ""};
  InverseResult r = c_preimage(rho, order, epsilon);
  Eigen::VectorXd eig = hermitian_eigenvalues(r.op.matrix());
  report.min_eigenvalue_of_inverse = eig.minCoeff();
  report.residual = r.residual;
  report.score = negative_part(eig);
  const bool psd = report.min_eigenvalue_of_inverse >= -1e-8;
  const bool solved = report.residual <= 1e-6;
  if (psd && solved) {
    report.verdict = Verdict::CertifiedClassical;
  } else if (!solved) {
    report.diagnostics = "round-trip residual " + fmt(report.residual) + " above 1e-6";
    if (!psd) report.diagnostics += "; preimage margin " + fmt(report.min_eigenvalue_of_inverse);
  } else {
    report.diagnostics = "preimage is not positive semidefinite (margin " +
                         fmt(report.min_eigenvalue_of_inverse) + ")";
  }
  return report;
}

double nonclassicality_score(const DensityOperator& rho, int order, double epsilon) {
  InverseResult r = c_preimage(rho, order, epsilon);
  return negative_part(hermitian_eigenvalues(r.op.matrix()));
}

std::vector<ScorePoint> score_ladder(const DensityOperator& rho, int order,
                                     const std::vector<double>& epsilons) {
  std::vector<ScorePoint> out;
  for (double eps : epsilons) {
    InverseResult r = c_preimage(rho, order, eps);
    Eigen::VectorXd eig = hermitian_eigenvalues(r.op.matrix());
    out.push_back({eps, negative_part(eig), eig.minCoeff()});
  }
  return out;
}

// Battery

DensityOperator random_density(std::size_t dim, std::size_t max_photons, std::size_t rank,
                               std::uint64_t seed) {
  if (max_photons + 1 > dim) throw InvalidDimension("random_density: support exceeds cutoff");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  Matrix rho = Matrix::Zero(idx(dim), idx(dim));
  std::vector<double> weights(rank);
  double total = 0.0;
  for (auto& w : weights) total += (w = uniform(gen));
  for (std::size_t r = 0; r < rank; ++r) {
    Vector v = Vector::Zero(idx(dim));
    for (std::size_t n = 0; n <= max_photons; ++n) v(idx(n)) = Complex(normal(gen), normal(gen));
    v.normalize();
    rho += (weights[r] / total) * v * v.adjoint();
  }
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityOperator(TruncatedOperator(std::move(rho), "random" + std::to_string(rank), true));
}

namespace {

using Factory = std::function<DensityOperator(std::size_t, std::uint64_t)>;

std::vector<std::pair<std::string, Factory>> battery_factories() {
  return {
      {"vacuum", [](std::size_t d, std::uint64_t) { return fock_state(0, d); }},
      {"fock1", [](std::size_t d, std::uint64_t) { return fock_state(1, d); }},
      {"fock2", [](std::size_t d, std::uint64_t) { return fock_state(2, d); }},
      {"fock3", [](std::size_t d, std::uint64_t) { return fock_state(3, d); }},
      {"coherent0.5", [](std::size_t d, std::uint64_t) { return coherent_state({0.5, 0.0}, d); }},
      {"coherent1.2", [](std::size_t d, std::uint64_t) { return coherent_state({1.2, 0.0}, d); }},
      {"coherent0.8+0.6i",
       [](std::size_t d, std::uint64_t) { return coherent_state({0.8, 0.6}, d); }},
      {"thermal0.5", [](std::size_t d, std::uint64_t) { return thermal_state(0.5, d); }},
      {"thermal1", [](std::size_t d, std::uint64_t) { return thermal_state(1.0, d); }},
      {"thermal1.5", [](std::size_t d, std::uint64_t) { return thermal_state(1.5, d); }},
      {"random3", [](std::size_t d, std::uint64_t seed) { return random_density(d, 10, 3, seed); }},
  };
}

} // namespace

std::vector<BatteryMember> default_battery(std::size_t dim, std::uint64_t seed) {
  std::vector<BatteryMember> out;
  for (const auto& [name, make] : battery_factories()) {
    DensityOperator rho = make(dim, seed);
    out.push_back({name, DensityOperator(rho.op().with_label(name))});
  }
  return out;
}

// Suite

const std::vector<std::string>& check_groups() {
  static const std::vector<std::string> groups{"prop1", "c2",     "parity",
                                               "amplifier", "photon", "image"};
  return groups;
}

std::map<std::string, double> default_tolerances() {
  return {{"prop1_wq", 1e-6},   {"prop1_smoothed", 2e-4}, {"c2", 1e-6},
          {"parity_c", 1e-7},   {"parity_c2", 1e-6},      {"amp_kernel", 1e-8},
          {"amp_dilation", 1e-6}, {"amp_parity", 1e-8},   {"photon", 1e-7},
          {"image", 1e-6}};
}

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

namespace {

// Derived objects shared between check groups, computed on first use.
struct MemberCache {
  BatteryMember member;
  TruncatedOperator x;
  std::optional<TruncatedOperator> cx;
  std::optional<QuasiDistribution> w_cx;
  std::optional<QuasiDistribution> q_x;

  const TruncatedOperator& c_of_x() {
    if (!cx) cx = trim(apply(ChannelSpec::channel_c(), x), 1e-15, 1);
    return *cx;
  }
};

class SuiteRunner {
public:
  explicit SuiteRunner(const SuiteConfig& config)
      : config_(config), tolerances_(default_tolerances()),
        grid_(config.grid_extent, config.grid_step) {
    for (const auto& [name, value] : config.tolerances) {
      if (name == "all") {
        for (auto& [k, v] : tolerances_) v = value;
      } else if (tolerances_.count(name)) {
        tolerances_[name] = value;
      } else {
        throw InvalidArgument("unknown tolerance name '" + name + "'");
      }
    }
    for (const auto& g : config.only)
      if (std::find(check_groups().begin(), check_groups().end(), g) == check_groups().end())
        throw InvalidArgument("unknown check group '" + g + "'");
  }

  VerificationReport run() {
    build_battery();
    if (enabled("prop1")) prop1();
    if (enabled("c2")) c2();
    if (enabled("parity")) parity();
    if (enabled("amplifier")) amplifier();
    if (enabled("photon")) photon();
    if (enabled("image")) image();
    return std::move(report_);
  }

private:
  bool enabled(const std::string& group) const {
    return config_.only.empty() ||
           std::find(config_.only.begin(), config_.only.end(), group) != config_.only.end();
  }

  double tol(const std::string& name) const { return tolerances_.at(name); }

  // Runs body, which returns {deviation, detail}; any library error fails the check.
  void check(const std::string& group, const std::string& name, const std::string& tol_name,
             const std::function<std::pair<double, std::string>()>& body) {
    auto start = std::chrono::steady_clock::now();
    CheckResult r{group, name, 0.0, tol(tol_name), false, 0.0, ""};
    try {
      auto [deviation, detail] = body();
      r.deviation = deviation;
      r.detail = detail;
      r.pass = std::isfinite(deviation) && deviation <= r.tolerance;
    } catch (const std::exception& e) {
      r.deviation = std::numeric_limits<double>::infinity();
      r.detail = std::string("error: ") + e.what();
    }
    r.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report_.checks.push_back(std::move(r));
  }

  void build_battery() {
    for (const auto& [name, make] : battery_factories()) {
      if (!config_.battery.empty() &&
          std::find(config_.battery.begin(), config_.battery.end(), name) == config_.battery.end())
        continue;
      try {
        DensityOperator rho = make(config_.dim, config_.seed);
        TruncatedOperator x = rho.op().with_label(name);
        BatteryMember m{name, DensityOperator(x)};
        // working copy: negligible tail cropped, a few empty levels kept above the support
        TruncatedOperator work = trim(x, 1e-15, 1);
        work = work.resized(std::min(config_.dim, work.dim() + 8));
        members_.push_back(MemberCache{m, work, {}, {}, {}});
      } catch (const std::exception& e) {
        report_.checks.push_back({"battery", "battery/" + name, std::numeric_limits<double>::infinity(),
                                  0.0, false, 0.0, std::string("error: ") + e.what()});
      }
    }
  }

  const QuasiDistribution& w_cx(MemberCache& m) {
    if (!m.w_cx) m.w_cx = sample(m.c_of_x(), DistKind::W, grid_);
    return *m.w_cx;
  }
  const QuasiDistribution& q_x(MemberCache& m) {
    if (!m.q_x) m.q_x = sample(m.x, DistKind::Q, grid_);
    return *m.q_x;
  }

  void prop1() {
    for (auto& m : members_) {
      check("prop1", "prop1/wq/" + m.member.name, "prop1_wq", [&] {
        const auto& w = w_cx(m);
        const auto& q = q_x(m);
        double dev = (w.values - q.values).cwiseAbs().maxCoeff();
        return std::make_pair(dev, "max |W_C(X) - Q_X| over the grid");
      });
      check("prop1", "prop1/smoothed/" + m.member.name, "prop1_smoothed", [&] {
        // grow the extent until W of X has decayed at the boundary
        double extent = config_.grid_extent;
        QuasiDistribution wx = sample(m.x, DistKind::W, grid_);
        while (boundary_max(wx) > 1e-8) {
          if (extent > config_.grid_extent + 10.0)
            throw GridTooSmall("W does not decay within the enlarged grid", boundary_max(wx));
          extent += 0.5;
          wx = sample(m.x, DistKind::W, PhaseGrid(extent, config_.grid_step));
        }
        QuasiDistribution smoothed = weierstrass(wx, 0.5);
        QuasiDistribution wc = extent == config_.grid_extent
                                   ? w_cx(m)
                                   : sample(m.c_of_x(), DistKind::W, wx.grid);
        double margin = 1.0 + (extent - config_.grid_extent);
        double dev = interior_max_deviation(smoothed, wc, margin);
        return std::make_pair(dev, "interior of the base grid, extent " + fmt(extent));
      });
    }
  }

  void c2() {
    for (auto& m : members_) {
      check("c2", "c2/routes/" + m.member.name, "c2", [&] {
        TruncatedOperator a = c_squared(m.x, C2Route::compose);
        TruncatedOperator b = c_squared(m.x, C2Route::reversed);
        TruncatedOperator c = c_squared(m.x, C2Route::projection);
        double ab = trace_distance(a, b), ac = trace_distance(a, c), bc = trace_distance(b, c);
        return std::make_pair(std::max({ab, ac, bc}), "compose/reversed " + fmt(ab) +
                                                          ", compose/projection " + fmt(ac) +
                                                          ", reversed/projection " + fmt(bc));
      });
    }
  }

  void parity() {
    const std::vector<std::pair<std::string, Complex>> points{
        {"0", {0.0, 0.0}}, {"0.7", {0.7, 0.0}}, {"-0.6+0.9i", {-0.6, 0.9}}, {"1.5", {1.5, 0.0}}};
    const ChannelSpec c = ChannelSpec::channel_c();
    for (const auto& [name, alpha] : points) {
      check("parity", "parity/c/" + name, "parity_c", [&, alpha = alpha] {
        TruncatedOperator pi = displaced_parity(alpha, config_.dim).op;
        TruncatedOperator out = apply(c, pi);
        double f = fidelity_with_pure(out, coherent_amplitudes(alpha, out.dim()));
        return std::make_pair(1.0 - f, "1 - <alpha|C(Pi)|alpha>");
      });
      check("parity", "parity/c2/" + name, "parity_c2", [&, alpha = alpha] {
        TruncatedOperator pi = displaced_parity(alpha, config_.dim).op;
        TruncatedOperator out = apply(c, apply(c, pi));
        DensityOperator target = displaced_thermal_state(0.5, alpha, out.dim());
        return std::make_pair(trace_distance(out, target), "trace distance to displaced thermal(1/2)");
      });
    }
  }

  void amplifier() {
    const std::size_t n = config_.dim;
    check("amplifier", "amplifier/vacuum/kernel", "amp_kernel", [&] {
      TruncatedOperator out = apply(ChannelSpec::amplifier(2.0), fock_state(0, n));
      return std::make_pair(trace_distance(out, thermal_state(1.0, out.dim())),
                            "trace distance to thermal(1)");
    });
    check("amplifier", "amplifier/vacuum/dilation", "amp_dilation", [&] {
      TruncatedOperator out = amplifier_dilated_auto(2.0, fock_state(0, 1));
      return std::make_pair(trace_distance(out, thermal_state(1.0, out.dim())),
                            "trace distance to thermal(1)");
    });
    check("amplifier", "amplifier/parity/kernel", "amp_parity", [&] {
      TruncatedOperator out = apply(ChannelSpec::amplifier(2.0), parity_matrix(n));
      Matrix target = Matrix::Zero(idx(out.dim()), idx(out.dim()));
      target(0, 0) = 0.5;
      return std::make_pair(trace_distance(out, TruncatedOperator(target)),
                            "trace distance to |0><0|/2");
    });
  }

  void photon() {
    struct Law {
      std::string name;
      std::function<TruncatedOperator(const TruncatedOperator&)> channel;
      std::function<TruncatedOperator(const TruncatedOperator&)> dilated;
      std::function<double(double)> derived;
      std::optional<std::function<double(double)>> printed;
      std::string derived_text, printed_text;
    };
    const std::vector<Law> laws{
        {"A_1.5", [](const auto& x) { return apply(ChannelSpec::amplifier(1.5), x); },
         [](const auto& x) { return amplifier_dilated_auto(1.5, x); },
         [](double n) { return 1.5 * n + 0.5; }, std::nullopt, "kappa <n> + kappa - 1", ""},
        {"A_2", [](const auto& x) { return apply(ChannelSpec::amplifier(2.0), x); },
         [](const auto& x) { return amplifier_dilated_auto(2.0, x); },
         [](double n) { return 2.0 * n + 1.0; }, std::nullopt, "kappa <n> + kappa - 1", ""},
        {"E_0.7", [](const auto& x) { return attenuator_apply(0.7, x); },
         [](const auto& x) { return attenuator_dilated_auto(0.7, x); },
         [](double n) { return 0.7 * n; }, [](double n) { return 0.7 * n + 0.3; },
         "lambda <n>", "lambda <n> + 1 - lambda"},
        {"E_0.5", [](const auto& x) { return attenuator_apply(0.5, x); },
         [](const auto& x) { return attenuator_dilated_auto(0.5, x); },
         [](double n) { return 0.5 * n; }, [](double n) { return 0.5 * n + 0.5; },
         "lambda <n>", "lambda <n> + 1 - lambda"},
        {"C", [](const auto& x) { return apply(ChannelSpec::channel_c(), x); },
         [](const auto& x) { return attenuator_dilated_auto(0.5, amplifier_dilated_auto(2.0, x)); },
         [](double n) { return n + 0.5; }, [](double n) { return n + 1.0; }, "<n> + 1/2",
         "<n> + 1"},
    };
    for (const auto& law : laws) {
      double printed_worst = 0.0, derived_worst = 0.0;
      check("photon", "photon/kernel/" + law.name, "photon", [&] {
        std::string worst_member;
        for (auto& m : members_) {
          double n_in = mean_photon(m.x);
          double n_out = mean_photon(law.channel(m.x));
          double r = std::abs(n_out - law.derived(n_in));
          if (r >= derived_worst) worst_member = m.member.name;
          derived_worst = std::max(derived_worst, r);
          if (law.printed) printed_worst = std::max(printed_worst, std::abs(n_out - (*law.printed)(n_in)));
        }
        return std::make_pair(derived_worst, law.derived_text + ", worst member " + worst_member);
      });
      check("photon", "photon/dilation/" + law.name, "photon", [&] {
        double worst = 0.0;
        std::size_t used = 0;
        for (auto& m : members_) {
          // the dilation is the oracle; keep it to members with a small support
          if (m.x.dim() > 24) continue;
          ++used;
          double n_in = mean_photon(m.x);
          worst = std::max(worst, std::abs(mean_photon(law.dilated(m.x)) - law.derived(n_in)));
        }
        return std::make_pair(worst, law.derived_text + " on " + std::to_string(used) +
                                         " members with support <= 24");
      });
      if (law.printed) {
        bool printed_fails = printed_worst > 1e-3;
        bool derived_holds = derived_worst <= tol("photon");
        std::string conclusion = printed_fails && derived_holds
                                     ? "printed form does not hold; derived form holds"
                                     : printed_fails ? "neither form holds within tolerance"
                                                     : "printed form agrees with the computation";
        report_.discrepancies.push_back({law.name, law.printed_text, law.derived_text, printed_worst,
                                         derived_worst, conclusion});
      }
    }
  }

  void image() {
    for (auto& m : members_) {
      check("image", "image/w_c/" + m.member.name, "image", [&] {
        double mn = w_cx(m).values.minCoeff();
        return std::make_pair(std::max(0.0, -mn), "min W of C(rho) = " + fmt(mn));
      });
      check("image", "image/w_c2/" + m.member.name, "image", [&] {
        TruncatedOperator c2 = trim(c_squared(m.x, C2Route::reversed), 1e-15, 1);
        double mn = sample(c2, DistKind::W, grid_).values.minCoeff();
        double q = q_x(m).values.minCoeff();
        return std::make_pair(std::max({0.0, -mn, -q}),
                              "min W of C^2(rho) = " + fmt(mn) + ", min P surrogate (Q of rho) = " + fmt(q));
      });
    }
  }

  SuiteConfig config_;
  std::map<std::string, double> tolerances_;
  PhaseGrid grid_;
  std::vector<MemberCache> members_;
  VerificationReport report_;
};

} // namespace

VerificationReport verify_suite(const SuiteConfig& config) {
  if (config.dim < 2) throw InvalidDimension("verify_suite: dim must be at least 2");
  SuiteRunner runner(config);
  return runner.run();
}

Json to_json(const VerificationReport& report, bool include_runtime) {
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    Json j{{"group", c.group},         {"name", c.name}, {"deviation", nullptr},
           {"tolerance", c.tolerance}, {"pass", c.pass}, {"detail", c.detail}};
    if (std::isfinite(c.deviation)) j["deviation"] = c.deviation;
    if (include_runtime) j["runtime_seconds"] = c.runtime_seconds;
    checks.push_back(std::move(j));
  }
  Json disc = Json::array();
  for (const auto& d : report.discrepancies)
    disc.push_back({{"law", d.law},
                    {"printed_formula", d.printed_formula},
                    {"derived_formula", d.derived_formula},
                    {"printed_residual", d.printed_residual},
                    {"derived_residual", d.derived_residual},
                    {"conclusion", d.conclusion}});
  return Json{{"passed", report.passed()}, {"checks", checks}, {"discrepancies", disc}};
}

std::string to_text_table(const VerificationReport& report) {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-34s %12s %10s %-4s %8s\n", "check", "deviation", "tolerance",
                "ok", "time[s]");
  os << line;
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "%-34s %12.3e %10.1e %-4s %8.2f\n", c.name.c_str(), c.deviation,
                  c.tolerance, c.pass ? "PASS" : "FAIL", c.runtime_seconds);
    os << line;
    if (!c.pass && !c.detail.empty()) os << "    " << c.detail << "\n";
  }
  if (!report.discrepancies.empty()) {
    os << "\nphoton-number discrepancies (printed vs derived):\n";
    for (const auto& d : report.discrepancies) {
      std::snprintf(line, sizeof line, "  %-6s printed %-26s residual %.3e | derived %-12s residual %.3e\n",
                    d.law.c_str(), d.printed_formula.c_str(), d.printed_residual,
                    d.derived_formula.c_str(), d.derived_residual);
      os << line << "         " << d.conclusion << "\n";
    }
  }
  os << "\n" << (report.passed() ? "ALL CHECKS PASSED" : "SOME CHECKS FAILED") << " ("
     << report.checks.size() << " checks)\n";
  return os.str();
}

} // namespace quasiphase
