// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail N]...
//
// A criterion listed with --expect-fail is still run and printed; its failure
// does not change the exit status, but an unexpected pass does.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "quasiphase/analysis.hpp"

using namespace quasiphase;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

TruncatedOperator geometric(double nbar, std::size_t dim) {
  Matrix m = Matrix::Zero(dim, dim);
  for (std::size_t n = 0; n < dim; ++n) m(n, n) = std::pow(nbar / (nbar + 1), n) / (nbar + 1);
  return TruncatedOperator(m);
}

double common_distance(const TruncatedOperator& a, const TruncatedOperator& b) {
  std::size_t n = std::min(a.dim(), b.dim());
  return trace_distance(a.resized(n), b.resized(n));
}

Outcome closed_forms() {
  PhaseGrid grid(2.5, 0.05);
  double worst_w = 0.0, worst_q = 0.0;
  for (unsigned n = 0; n <= 8; ++n) {
    auto rho = fock_state(n, 64);
    auto w = sample(rho, DistKind::W, grid);
    auto q = sample(rho, DistKind::Q, grid);
    for (std::size_t j = 0; j < grid.points_per_axis(); ++j)
      for (std::size_t k = 0; k < grid.points_per_axis(); ++k) {
        Complex a = grid.point(j, k);
        double x = std::norm(a);
        if (x > 2.5 * 2.5 + 1e-12) continue;
        double w_ref = 2.0 * (n % 2 ? -1.0 : 1.0) * std::exp(-2.0 * x) * std::laguerre(n, 4.0 * x);
        double q_ref = n == 0 ? std::exp(-x) : std::exp(n * std::log(x) - x - std::lgamma(n + 1.0));
        worst_w = std::max(worst_w, std::abs(w.values(j, k) - w_ref));
        worst_q = std::max(worst_q, std::abs(q.values(j, k) - q_ref));
      }
  }
  return {worst_w <= 1e-8 && worst_q <= 1e-8,
          "W dev " + sci(worst_w) + ", Q dev " + sci(worst_q) + " (tol 1e-8)"};
}

Outcome amplifier_truth() {
  auto kernel = amplifier_apply(2.0, fock_state(0, 16), 64);
  double dk = trace_distance(kernel, geometric(1.0, 64));
  auto dil = amplifier_dilated(2.0, fock_state(0, 8), 32, 40);
  double dd = trace_distance(dil, geometric(1.0, 40));
  auto par = amplifier_apply(2.0, parity_matrix(48), 48);
  Matrix half = Matrix::Zero(48, 48);
  half(0, 0) = 0.5;
  double dp = (par.matrix() - half).cwiseAbs().maxCoeff();
  return {dk <= 1e-8 && dd <= 1e-6 && dp <= 1e-8,
          "kernel " + sci(dk) + " (1e-8), dilation " + sci(dd) + " (1e-6), parity " + sci(dp) + " (1e-8)"};
}

Outcome from_suite(const VerificationReport& report, const std::vector<std::string>& prefixes) {
  double worst_ratio = 0.0;
  std::size_t count = 0, failed = 0;
  std::string first_failure;
  for (const auto& c : report.checks) {
    bool selected = c.group == "battery";
    for (const auto& p : prefixes) selected = selected || c.name.rfind(p, 0) == 0;
    if (!selected) continue;
    ++count;
    if (!c.pass) {
      ++failed;
      if (first_failure.empty()) first_failure = c.name + " " + sci(c.deviation);
    }
    if (c.tolerance > 0) worst_ratio = std::max(worst_ratio, c.deviation / c.tolerance);
  }
  std::string detail = std::to_string(count) + " checks, worst deviation/tolerance " + sci(worst_ratio);
  if (failed) detail += ", " + std::to_string(failed) + " failed (first: " + first_failure + ")";
  return {count > 0 && failed == 0, detail};
}

Outcome photon_laws(const VerificationReport& report) {
  Outcome o = from_suite(report, {"photon/"});
  bool stated = report.discrepancies.size() >= 3;
  for (const auto& d : report.discrepancies) {
    stated = stated && d.printed_residual > 1e-3 && d.derived_residual <= 1e-7;
    o.detail += "; " + d.law + ": printed " + sci(d.printed_residual) + ", derived " +
                sci(d.derived_residual);
  }
  o.pass = o.pass && stated;
  return o;
}

Outcome inverse_round_trip() {
  const std::size_t dim = 40;
  const double eps = 1e-10;
  std::vector<std::pair<std::string, DensityOperator>> low{
      {"vacuum", fock_state(0, dim)},
      {"fock1", fock_state(1, dim)},
      {"fock2", fock_state(2, dim)},
      {"fock3", fock_state(3, dim)},
      {"random3", random_density(dim, 8, 3, 1)}};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, rho] : low) {
    auto image = apply(ChannelSpec::channel_c(), rho).resized(dim);
    auto back = c_inverse(dim, eps).solve(image);
    double d = trace_distance(back.op, rho);
    if (d > worst) worst = d, worst_name = name;
  }
  std::size_t certified = 0, total = 0;
  std::string missed;
  for (const auto& m : default_battery(dim, 1)) {
    auto image = DensityOperator(apply(ChannelSpec::channel_c(), m.rho).resized(dim), std::nullopt, 1e-6);
    ++total;
    if (classicality_check(image, 1, eps).verdict == Verdict::CertifiedClassical) ++certified;
    else missed += (missed.empty() ? "" : ",") + m.name;
  }
  return {worst <= 1e-4 && certified == total,
          "worst round trip " + sci(worst) + " (" + worst_name + ", tol 1e-4), certified " +
              std::to_string(certified) + "/" + std::to_string(total) +
              (missed.empty() ? "" : " (inconclusive: " + missed + ")")};
}

Outcome oracles() {
  double worst_amp = 0.0, worst_att = 0.0;
  for (unsigned n = 0; n <= 8; ++n) {
    auto rho = fock_state(n, n + 8);
    for (double kappa : {1.5, 2.0})
      worst_amp = std::max(worst_amp, common_distance(apply(ChannelSpec::amplifier(kappa), rho),
                                                      amplifier_dilated_auto(kappa, rho)));
    for (double lambda : {0.7, 0.5})
      worst_att = std::max(worst_att, trace_distance(attenuator_apply(lambda, rho),
                                                     attenuator_dilated_auto(lambda, rho)));
  }
  double worst_w = 0.0;
  PhaseGrid beta(6.0, 0.1);
  const std::vector<Complex> points{{0.0, 0.0}, {0.5, 0.3}, {-1.0, 0.7}, {0.2, -1.2}};
  for (const auto& rho : {fock_state(0, 32), fock_state(1, 32), fock_state(3, 32),
                          coherent_state({0.6, -0.4}, 32), thermal_state(0.5, 48)}) {
    CharacteristicFunction chi(rho, beta);
    for (Complex a : points) worst_w = std::max(worst_w, std::abs(chi.wigner(a) - w_at(rho, a).real()));
  }
  double worst_kraus = 0.0;
  for (double lambda : {0.3, 0.5, 0.7, 0.9})
    worst_kraus = std::max(worst_kraus, attenuator_kraus(lambda, 64).completeness_residual());
  return {worst_amp <= 1e-6 && worst_att <= 1e-6 && worst_w <= 5e-3 && worst_kraus <= 1e-10,
          "amplifier " + sci(worst_amp) + ", attenuator " + sci(worst_att) + " (1e-6); w_at vs chi " +
              sci(worst_w) + " (5e-3); Kraus " + sci(worst_kraus) + " (1e-10)"};
}

} // namespace

int main(int argc, char** argv) {
  std::set<int> expected_fail;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
      expected_fail.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--expect-fail N]...\n");
      return 2;
    }
  }

  auto start = std::chrono::steady_clock::now();
  std::printf("running verification suite (defaults)...\n");
  std::fflush(stdout);
  VerificationReport suite = verify_suite();

  std::vector<std::function<Outcome()>> criteria{
      closed_forms,
      amplifier_truth,
      [&] { return from_suite(suite, {"prop1/wq/"}); },
      [&] { return from_suite(suite, {"prop1/smoothed/"}); },
      [&] { return from_suite(suite, {"c2/"}); },
      [&] { return from_suite(suite, {"parity/"}); },
      [&] { return photon_laws(suite); },
      [&] { return from_suite(suite, {"image/"}); },
      inverse_round_trip,
      oracles,
  };

  int status = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool known = expected_fail.count(id) > 0;
    const char* tag = o.pass ? (known ? "PASS (unexpected)" : "PASS") : (known ? "FAIL (known)" : "FAIL");
    std::printf("criterion %d: %s  %s\n", id, tag, o.detail.c_str());
    std::fflush(stdout);
    if (o.pass == known) status = 1;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("total %.1f s\n", secs);
  return status;
}
