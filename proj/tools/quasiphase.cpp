// quasiphase: build states, apply channels, sample P/W/Q, run the verification suite.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quasiphase/analysis.hpp"
#include "quasiphase/channels.hpp"
#include "quasiphase/fock.hpp"
#include "quasiphase/phasespace.hpp"
#include "quasiphase/serialize.hpp"

namespace fs = std::filesystem;
using namespace quasiphase;

namespace {

struct RunConfig {
  std::size_t dim = 64;
  double grid_extent = 5.0;
  double grid_step = 0.05;
  std::vector<std::string> tol;
  std::uint64_t seed = 1;
  std::string out;
};

double parse_number(const std::string& text, std::size_t begin, std::size_t end) {
  double v = 0.0;
  const char* first = text.data() + begin;
  const char* last = text.data() + end;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || begin == end)
    throw ParseError("expected a number at position " + std::to_string(begin) + " in '" + text + "'",
                     begin);
  return v;
}

// "re,im" starting at `begin`
Complex parse_complex(const std::string& text, std::size_t begin) {
  std::size_t comma = text.find(',', begin);
  if (comma == std::string::npos)
    throw ParseError("expected 're,im' at position " + std::to_string(begin) + " in '" + text + "'",
                     begin);
  return {parse_number(text, begin, comma), parse_number(text, comma + 1, text.size())};
}

TruncatedOperator state_from_spec(const std::string& spec, std::size_t dim) {
  std::size_t colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::size_t arg = colon == std::string::npos ? spec.size() : colon + 1;
  auto require_arg = [&] {
    if (colon == std::string::npos)
      throw ParseError("state '" + kind + "' needs an argument after ':' (position " +
                           std::to_string(spec.size()) + ")",
                       spec.size());
  };
  if (kind == "vacuum") {
    if (colon != std::string::npos)
      throw ParseError("vacuum takes no argument (position " + std::to_string(colon) + ")", colon);
    return fock_state(0, dim).op().with_label("vacuum");
  }
  if (kind == "fock") {
    require_arg();
    double n = parse_number(spec, arg, spec.size());
    if (n < 0 || n != std::floor(n))
      throw ParseError("fock level must be a non-negative integer (position " + std::to_string(arg) +
                           ")",
                       arg);
    return fock_state(static_cast<std::size_t>(n), dim).op().with_label(spec);
  }
  if (kind == "coherent") {
    require_arg();
    return coherent_state(parse_complex(spec, arg), dim).op().with_label(spec);
  }
  if (kind == "thermal") {
    require_arg();
    return thermal_state(parse_number(spec, arg, spec.size()), dim).op().with_label(spec);
  }
  if (kind == "parity") {
    require_arg();
    return displaced_parity(parse_complex(spec, arg), dim).op.with_label(spec);
  }
  if (kind == "file") {
    require_arg();
    return load_operator(spec.substr(arg));
  }
  throw ParseError("unknown state kind '" + kind + "' at position 0 (expected vacuum, fock, "
                   "coherent, thermal, parity or file)",
                   0);
}

Json load_json(const fs::path& path) {
  std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

void apply_tolerances(const RunConfig& cfg, SuiteConfig* suite) {
  Tolerances lib = tolerances();
  const auto suite_names = default_tolerances();
  for (const auto& item : cfg.tol) {
    std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ParseError("--tol expects name=value, got '" + item + "'", item.size());
    std::string name = item.substr(0, eq);
    double value = parse_number(item, eq + 1, item.size());
    if (!(value > 0.0)) throw InvalidArgument("tolerance '" + name + "' must be positive");
    if (name == "hermitian") lib.hermitian = value;
    else if (name == "psd") lib.psd = value;
    else if (name == "tail") lib.tail = value;
    else if (suite && (name == "all" || suite_names.count(name))) suite->tolerances[name] = value;
    else throw InvalidArgument("unknown tolerance '" + name + "'");
  }
  set_tolerances(lib);
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path p = path;
  p.replace_extension();
  return p.string() + suffix;
}

int cmd_state(const RunConfig& cfg, const std::string& spec) {
  apply_tolerances(cfg, nullptr);
  TruncatedOperator op = state_from_spec(spec, cfg.dim);
  fs::path out = cfg.out.empty() ? fs::path("state.json") : fs::path(cfg.out);
  save_operator(op, out);
  std::cout << "wrote " << out.string() << " (dim " << op.dim() << ")\n";
  return 0;
}

int cmd_channel(const RunConfig& cfg, const std::string& channel_path, const std::string& state_path) {
  apply_tolerances(cfg, nullptr);
  ChannelSpec spec = channel_from_json(load_json(channel_path));
  TruncatedOperator in = load_operator(state_path);
  std::optional<double> residual;
  TruncatedOperator out = [&] {
    if (const auto* inv = std::get_if<channel::Inverse>(&spec.node())) {
      InverseResult r = inverse_apply(*inv->inner, in, inv->epsilon);
      residual = r.residual;
      return r.op;
    }
    return apply(spec, in);
  }();

  Json diag{{"channel", to_json(spec)},
            {"description", spec.describe()},
            {"dim_in", in.dim()},
            {"dim_out", out.dim()},
            {"trace_in", in.trace().real()},
            {"trace_out", out.trace().real()},
            {"trace_deficit", std::abs(in.trace() - out.trace())}};
  bool hermitian = hermiticity_defect(out.matrix()) <= 1e-10;
  if (hermitian) {
    double margin = psd_margin(out);
    diag["psd_margin"] = margin;
    diag["psd_violation"] = margin < -1e-8;
    diag["mean_photon_in"] = mean_photon(in);
    diag["mean_photon_out"] = mean_photon(out);
  } else {
    diag["psd_margin"] = nullptr;
    diag["hermiticity_defect"] = hermiticity_defect(out.matrix());
  }
  if (residual) diag["inverse_residual"] = *residual;

  fs::path out_path = cfg.out.empty() ? fs::path("channel_out.json") : fs::path(cfg.out);
  save_operator(out, out_path);
  fs::path diag_path = sibling(out_path, ".diagnostics.json");
  write_file_atomic(diag_path, dump_json(diag) + "\n");
  std::cout << "wrote " << out_path.string() << " and " << diag_path.string() << "\n";
  if (hermitian && diag["psd_violation"].get<bool>())
    std::cout << "warning: output is not positive semidefinite (margin "
              << diag["psd_margin"].get<double>() << ")\n";
  return 0;
}

int cmd_dist(const RunConfig& cfg, const std::string& kind_text, const std::string& state_path) {
  apply_tolerances(cfg, nullptr);
  DistKind kind = dist_kind_from_string(kind_text);
  TruncatedOperator x = load_operator(state_path);
  PhaseGrid grid(cfg.grid_extent, cfg.grid_step);
  QuasiDistribution dist = sample(x, kind, grid);
  Negativity neg = negativity(dist);
  Json meta = to_json(dist);
  meta.erase("values");
  meta["integral"] = integrate(dist);
  meta["negativity"] = {{"min_value", neg.min_value}, {"negative_volume", neg.negative_volume}};
  meta["boundary_max"] = boundary_max(dist);

  fs::path csv = cfg.out.empty() ? fs::path("dist.csv") : fs::path(cfg.out);
  write_file_atomic(csv, to_csv(dist));
  fs::path json = sibling(csv, ".json");
  write_file_atomic(json, dump_json(meta) + "\n");
  std::cout << "wrote " << csv.string() << " and " << json.string() << " (integral "
            << meta["integral"].get<double>() << ", min " << neg.min_value << ")\n";
  return 0;
}

int cmd_verify(const RunConfig& cfg, const std::string& only) {
  SuiteConfig suite;
  suite.dim = cfg.dim;
  suite.grid_extent = cfg.grid_extent;
  suite.grid_step = cfg.grid_step;
  suite.seed = cfg.seed;
  apply_tolerances(cfg, &suite);
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) suite.only.push_back(item);

  VerificationReport report = verify_suite(suite);
  fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "verify_report.json", dump_json(to_json(report)) + "\n");
  write_file_atomic(dir / "verify_timing.json", dump_json(to_json(report, true)) + "\n");
  std::string table = to_text_table(report);
  write_file_atomic(dir / "verify_report.txt", table);
  std::cout << table;
  return report.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasiprobability distributions and the amplifier/attenuator channel C"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto common = [&cfg](CLI::App* sub) {
    sub->add_option("--dim", cfg.dim, "Fock cutoff")->check(CLI::Range(8, 4096));
    sub->add_option("--grid-extent", cfg.grid_extent, "half width R of the phase-space grid")
        ->check(CLI::PositiveNumber);
    sub->add_option("--grid-step", cfg.grid_step, "grid spacing h")->check(CLI::PositiveNumber);
    sub->add_option("--tol", cfg.tol, "tolerance override name=value (repeatable)");
    sub->add_option("--seed", cfg.seed, "seed of the random battery member");
    sub->add_option("--out", cfg.out, "output file (directory for verify)");
  };

  std::string spec, channel_path, state_path, kind, only;
  auto* state = app.add_subcommand("state", "write a state or operator as JSON");
  state->add_option("spec", spec,
                    "vacuum | fock:n | coherent:re,im | thermal:nbar | parity:re,im | file:path")
      ->required();
  common(state);

  auto* chan = app.add_subcommand("channel", "apply a channel from JSON to an operator file");
  chan->add_option("channel", channel_path, "channel JSON")->required()->check(CLI::ExistingFile);
  chan->add_option("state", state_path, "operator JSON")->required()->check(CLI::ExistingFile);
  common(chan);

  auto* dist = app.add_subcommand("dist", "sample P, W or Q on a grid");
  dist->add_option("kind", kind, "P, W or Q")->required();
  dist->add_option("state", state_path, "operator JSON")->required()->check(CLI::ExistingFile);
  common(dist);

  auto* verify = app.add_subcommand("verify", "run the verification suite");
  verify->add_option("--only", only, "comma-separated groups: prop1,c2,parity,amplifier,photon,image");
  common(verify);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*state) return cmd_state(cfg, spec);
    if (*chan) return cmd_channel(cfg, channel_path, state_path);
    if (*dist) return cmd_dist(cfg, kind, state_path);
    if (*verify) return cmd_verify(cfg, only);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
