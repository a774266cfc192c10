#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quasiphase/fock.hpp"
#include "quasiphase/serialize.hpp"

namespace fs = std::filesystem;
using namespace quasiphase;
using Catch::Approx;

namespace {

struct Run {
  int status;
  std::string output;
};

class Sandbox {
public:
  explicit Sandbox(const std::string& name) : dir_(fs::temp_directory_path() / ("quasiphase_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path path(const std::string& file) const { return dir_ / file; }

  Run run(const std::string& args) const {
    fs::path log = dir_ / "log.txt";
    std::string cmd = "cd '" + dir_.string() + "' && '" QUASIPHASE_CLI "' " + args + " > '" +
                      log.string() + "' 2>&1";
    int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(log)};
  }

  void write(const std::string& file, const std::string& text) const { write_file_atomic(path(file), text); }

private:
  fs::path dir_;
};

Json load(const fs::path& p) { return Json::parse(read_file(p)); }

const char* c_spec =
    R"({"kind":"compose","items":[{"kind":"attenuator","lambda":0.5},{"kind":"amplifier","kappa":2.0}]})";

} // namespace

TEST_CASE("state command", "[cli]") {
  Sandbox box("state");
  SECTION("thermal") {
    auto r = box.run("state thermal:1.0 --out t.json");
    REQUIRE(r.status == 0);
    auto op = load_operator(box.path("t.json"));
    CHECK(op.dim() == 64);
    for (std::size_t n = 0; n < 64; ++n)
      CHECK(op(n, n).real() == Approx(std::pow(2.0, -(n + 1.0))).epsilon(1e-13));
  }
  SECTION("fock projector in the default file") {
    REQUIRE(box.run("state fock:2 --dim 8").status == 0);
    auto op = load_operator(box.path("state.json"));
    CHECK(op.dim() == 8);
    CHECK(op(2, 2).real() == 1.0);
    CHECK(op.matrix().cwiseAbs().sum() == 1.0);
  }
  SECTION("coherent state too large for the cutoff") {
    auto r = box.run("state coherent:3,0 --dim 16");
    CHECK(r.status == 2);
    CHECK(r.output.find("requires dim >= " + std::to_string(required_dim_poisson(9.0, 1e-8))) !=
          std::string::npos);
  }
  SECTION("parse errors carry a position") {
    auto r = box.run("state coherent:1,x");
    CHECK(r.status == 2);
    CHECK(r.output.find("position 11") != std::string::npos);
    CHECK(box.run("state squeezed:1").status == 2);
    CHECK(box.run("state fock:2 --dim 4").status != 0);
  }
  SECTION("bit-exact round trip") {
    REQUIRE(box.run("state coherent:0.3,-1.1 --dim 40 --out a.json").status == 0);
    REQUIRE(box.run("state file:a.json --out b.json").status == 0);
    auto a = load_operator(box.path("a.json"));
    auto b = load_operator(box.path("b.json"));
    CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(read_file(box.path("a.json")) == read_file(box.path("b.json")));
    CHECK(a.label() == "coherent:0.3,-1.1");
  }
}

TEST_CASE("channel command", "[cli]") {
  Sandbox box("channel");
  box.write("c.json", c_spec);
  box.write("amp.json", R"({"kind":"amplifier","kappa":2})");
  box.write("inv.json", std::string(R"({"kind":"inverse","epsilon":1e-10,"inner":)") + c_spec + "}");
  REQUIRE(box.run("state vacuum --dim 16 --out vac.json").status == 0);

  SECTION("C of vacuum") {
    REQUIRE(box.run("channel c.json vac.json --out out.json").status == 0);
    auto diag = load(box.path("out.diagnostics.json"));
    CHECK(diag["mean_photon_out"].get<double>() == Approx(0.5).margin(1e-7));
    CHECK(diag["psd_violation"] == false);
    auto out = load_operator(box.path("out.json"));
    for (std::size_t n = 0; n < 12; ++n)
      CHECK(out(n, n).real() == Approx(2.0 / 3.0 * std::pow(1.0 / 3.0, n)).margin(1e-10));
  }
  SECTION("amplifier of vacuum") {
    REQUIRE(box.run("channel amp.json vac.json").status == 0);
    auto out = load_operator(box.path("channel_out.json"));
    for (std::size_t n = 0; n < 30; ++n)
      CHECK(out(n, n).real() == Approx(std::pow(2.0, -(n + 1.0))).margin(1e-12));
  }
  SECTION("inverse of C on a coherent state is flagged") {
    REQUIRE(box.run("state coherent:0.7,0 --dim 24 --out coh.json").status == 0);
    auto r = box.run("channel inv.json coh.json --out pre.json");
    REQUIRE(r.status == 0);
    CHECK(r.output.find("warning") != std::string::npos);
    auto diag = load(box.path("pre.diagnostics.json"));
    CHECK(diag["psd_margin"].get<double>() < 0.0);
    CHECK(diag["psd_violation"] == true);
    CHECK(diag.contains("inverse_residual"));
  }
  SECTION("malformed channel") {
    box.write("bad.json", R"({"kind":"amplifier","kappa":0.2})");
    CHECK(box.run("channel bad.json vac.json").status == 2);
    box.write("broken.json", "{\"kind\":");
    CHECK(box.run("channel broken.json vac.json").status == 2);
  }
}

TEST_CASE("dist command", "[cli]") {
  Sandbox box("dist");
  REQUIRE(box.run("state vacuum --dim 16 --out vac.json").status == 0);
  REQUIRE(box.run("state fock:1 --dim 16 --out f1.json").status == 0);
  SECTION("Q of vacuum") {
    REQUIRE(box.run("dist Q vac.json --grid-extent 4 --grid-step 0.1 --out q.csv").status == 0);
    auto meta = load(box.path("q.json"));
    CHECK(meta["integral"].get<double>() == Approx(1.0).margin(1e-6));
    std::string csv = read_file(box.path("q.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 81 * 81 + 1);
  }
  SECTION("W of a single photon") {
    REQUIRE(box.run("dist W f1.json --grid-extent 3 --grid-step 0.1 --out w.csv").status == 0);
    auto meta = load(box.path("w.json"));
    CHECK(meta["negativity"]["min_value"].get<double>() == Approx(-2.0).margin(1e-9));
  }
  SECTION("P of a single photon is singular") {
    auto r = box.run("dist P f1.json --grid-extent 2 --grid-step 0.1");
    CHECK(r.status == 2);
    CHECK(r.output.find("delta") != std::string::npos);
  }
}

TEST_CASE("verify command", "[cli][suite]") {
  Sandbox box("verify");
  SECTION("defaults pass") {
    auto r = box.run("verify --out rep");
    CHECK(r.status == 0);
    auto report = load(box.path("rep/verify_report.json"));
    CHECK(report["passed"] == true);
    CHECK(fs::exists(box.path("rep/verify_timing.json")));
    CHECK(fs::exists(box.path("rep/verify_report.txt")));
  }
  SECTION("only the requested group") {
    REQUIRE(box.run("verify --only prop1 --out rep").status == 0);
    auto report = load(box.path("rep/verify_report.json"));
    REQUIRE(report["checks"].size() == 22);
    for (const auto& c : report["checks"]) CHECK(c["group"] == "prop1");
  }
  SECTION("under-resolved cutoff fails") {
    auto r = box.run("verify --dim 12 --only prop1,photon --out rep");
    CHECK(r.status == 1);
    auto report = load(box.path("rep/verify_report.json"));
    CHECK(report["passed"] == false);
  }
  SECTION("byte-identical reports") {
    REQUIRE(box.run("verify --only parity,amplifier --seed 5 --out a").status == 0);
    REQUIRE(box.run("verify --only parity,amplifier --seed 5 --out b").status == 0);
    CHECK(read_file(box.path("a/verify_report.json")) == read_file(box.path("b/verify_report.json")));
  }
  SECTION("bad tolerances are refused") {
    CHECK(box.run("verify --only parity --tol parity_c=0").status == 2);
    CHECK(box.run("verify --only parity --tol nonsense=1").status == 2);
    CHECK(box.run("verify --dim 4").status != 0);
  }
}
