#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "hjcon/cli.hpp"
#include "hjcon/config.hpp"
#include "hjcon/sweep.hpp"
#include "test_helpers.hpp"

using namespace hjcon;
using hjtest::canonical_init;
using hjtest::canonical_model;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "hjcon_harness_test";
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

const char* kCanonicalModel = R"({
  "a": 1.0, "B": [[1.0]], "theta": [0.5], "c": 1.0,
  "psi": {"kind": "const", "value": 1.0}
})";

} // namespace

TEST_CASE("fit_line recovers slope and intercept") {
    const LinearFit f = fit_line({1.0, 2.0, 3.0, 4.0}, {2.1, 4.1, 6.1, 8.1});
    CHECK(f.slope == Approx(2.0));
    CHECK(f.intercept == Approx(0.1));
}

TEST_CASE("auto_box pushes the faces below the -8 level") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    const Box box = auto_box(model, init, 1.0);
    const SandwichEnvelope env = SandwichEnvelope::make(model, init, 0.0);
    const double y2 = (box.hi[0] - model.theta()[0]) * (box.hi[0] - model.theta()[0]);
    CHECK(env.value_upper(1.0, y2) <= -8.0 + 1e-9);
    CHECK(box.lo[0] < 0.0);
}

TEST_CASE("concentration moments of a synthetic Gaussian") {
    const RateModel model = canonical_model();
    const double eps = 0.02, x0 = 0.4, mass = 0.8;
    const GridField n = GridField::sample(Box::interval(-3, 4), {2801}, [&](const Vec& x) {
        const double z = x[0] - x0;
        return mass / std::sqrt(std::numbers::pi * eps) * std::exp(-z * z / eps);
    });
    AnsatzSample limit;
    limit.t = 1.0;
    limit.m = hjtest::vec1(x0);
    limit.A = hjtest::mat1(0.5);
    limit.I = mass;
    const MomentReport rep = concentration_check(model, n, eps, limit);
    CHECK(rep.m0 == Approx(mass).margin(1e-10));
    CHECK(rep.mean[0] == Approx(x0).margin(1e-10));
    CHECK(rep.second_central == Approx(0.5 * eps).margin(1e-8)); // var of the Gaussian
    CHECK(rep.m0_vs_rho <= 1e-10);
    CHECK(rep.mean_vs_xbar <= 1e-10);
}

TEST_CASE("model and init JSON round trip") {
    const json jm = json::parse(kCanonicalModel);
    const RateModel m = model_from_json(jm);
    CHECK(m.a() == 1.0);
    CHECK(m.theta()[0] == 0.5);
    CHECK(m.I_max() == Approx(1.0));
    const json ji = json::parse(R"({"m0": [0.0], "A0": [[1.0]]})");
    const InitialData init = init_from_json(ji, m);
    CHECK(init.I0 == Approx(0.75));
    CHECK(init.r == Approx(0.75 / std::sqrt(std::numbers::pi)));

    const json jpoly = json::parse(R"({"kind": "poly", "coeffs": [1.0, 1.0]})");
    const PsiSpec psi = psi_from_json(jpoly);
    CHECK(psi.eval(hjtest::vec1(2.0)) == Approx(5.0));
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"a": 1.0})")), config_error);
}

TEST_CASE("validate-model CLI: canonical passes, seeded violations exit 3") {
    const fs::path dir = temp_dir();
    const fs::path out = dir / "out";

    write_text(dir / "canonical.json", kCanonicalModel);
    CHECK(cli::run({"--out", out.string(), "validate-model", (dir / "canonical.json").string()}) ==
          0);

    write_text(dir / "c_zero.json", R"({"a": 1.0, "B": [[1.0]], "theta": [0.5], "c": 0.0})");
    CHECK(cli::run({"--out", out.string(), "validate-model", (dir / "c_zero.json").string()}) == 3);

    write_text(dir / "b_indef.json",
               R"({"a": 1.0, "B": [[1.0, 0.0], [0.0, -0.5]], "theta": [0.0, 0.0], "c": 1.0})");
    CHECK(cli::run({"--out", out.string(), "validate-model", (dir / "b_indef.json").string()}) ==
          3);

    write_text(dir / "u0_shift.json", R"({
      "model": {"a": 1.0, "B": [[1.0]], "theta": [0.5], "c": 1.0},
      "init": {"m0": [0.0], "A0": [[1.0]], "offset": -0.1}
    })");
    CHECK(cli::run({"--out", out.string(), "validate-model", (dir / "u0_shift.json").string()}) ==
          3);

    CHECK(cli::run({"validate-model", (dir / "missing.json").string()}) == 1);
}

TEST_CASE("solve-oracle CLI produces deterministic CSV artifacts") {
    const fs::path dir = temp_dir();
    write_text(dir / "oracle_cfg.json", R"({
      "model": {"a": 1.0, "B": [[1.0]], "theta": [0.5], "c": 1.0},
      "init": {"m0": [0.0], "A0": [[1.0]]},
      "T": 1.0, "dt": 1e-3, "sample_every": 100
    })");
    const fs::path o1 = dir / "run1", o2 = dir / "run2";
    REQUIRE(cli::run({"--out", o1.string(), "solve-oracle", "--config",
                      (dir / "oracle_cfg.json").string()}) == 0);
    REQUIRE(cli::run({"--out", o2.string(), "solve-oracle", "--config",
                      (dir / "oracle_cfg.json").string()}) == 0);
    const std::string a = read_bytes(o1 / "oracle_trajectory.csv");
    const std::string b = read_bytes(o2 / "oracle_trajectory.csv");
    REQUIRE(!a.empty());
    CHECK(a == b); // bit-identical
}

TEST_CASE("mini sweep wires runs, fits and moments together") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    SweepConfig sc;
    sc.eps_ladder = {0.2, 0.1, 0.05, 0.025};
    sc.t_star = {0.4};
    sc.grid_h_factor = 10.0;
    sc.sample_every = 4;
    sc.concurrent = true;
    sc.limit_ref.box = auto_box(model, init, 0.4);
    sc.limit_ref.n = {901};
    sc.limit_ref.dt = 4e-4;
    sc.limit_ref.sample_every = 20;

    const SweepReport rep = sweep(model, init, sc);
    REQUIRE(rep.entries.size() == 4);
    REQUIRE(rep.runs.size() == 4);
    REQUIRE(rep.fits.size() == 1);
    CHECK(rep.ref_I_agreement <= 5e-4);
    CHECK(rep.ref_x_agreement <= 5e-4);
    // errors shrink along the ladder and the slope is near first order
    CHECK(rep.entries[3].I_err_abs < rep.entries[0].I_err_abs);
    CHECK(rep.fits[0].slope_I > 0.5);
    CHECK(rep.fits[0].slope_I < 1.6);
    CHECK(rep.fits[0].u_monotone);
    // moments exist per (eps, t*) and track the limit
    REQUIRE(rep.moments.size() == 4);
    CHECK(rep.moments.back().mean_vs_xbar <= 0.05);
    // serialization smoke
    const json j = sweep_report_to_json(rep);
    CHECK(j["entries"].size() == 4);
}

TEST_CASE("unknown CLI input is a config error, not a crash") {
    CHECK(cli::run({"no-such-command"}) == 1);
    CHECK(cli::run({"solve-limit", "--config", "/nonexistent/path.json"}) == 1);
}
