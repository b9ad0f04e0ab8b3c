#include <catch2/catch.hpp>

#include <cmath>

#include "hjcon/parabolic.hpp"
#include "hjcon/quadratic_oracle.hpp"
#include "test_helpers.hpp"

using namespace hjcon;
using hjtest::canonical_init;
using hjtest::canonical_model;
using hjtest::mat1;
using hjtest::vec1;

TEST_CASE("pure heat step conserves mass with reflecting boundaries") {
    const RateModel zero(0.0, mat1(0.0), vec1(0.0), 0.0); // R = 0
    const GridField n0 = GridField::sample(Box::interval(-6, 6), {601}, [](const Vec& x) {
        return std::exp(-x.squaredNorm());
    });
    const double mass0 = integrate(n0);
    GridField n = n0;
    for (int s = 0; s < 10; ++s) n = step_parabolic(zero, n, 0.1, 1e-3);
    CHECK(integrate(n) == Approx(mass0).margin(1e-10));
    CHECK(trapezoid_mass(n) == Approx(trapezoid_mass(n0)).margin(1e-12));
    // diffusion spreads the profile
    CHECK(max_abs(n) < max_abs(n0));
}

TEST_CASE("2-d heat step conserves mass (ADI)") {
    const RateModel zero(0.0, Mat::Zero(2, 2), Vec::Zero(2), 0.0);
    const GridField n0 = GridField::sample(Box::rect(-5, 5, -5, 5), {101, 101}, [](const Vec& x) {
        return std::exp(-x.squaredNorm());
    });
    GridField n = n0;
    for (int s = 0; s < 5; ++s) n = step_parabolic(zero, n, 0.1, 1e-3);
    CHECK(trapezoid_mass(n) == Approx(trapezoid_mass(n0)).margin(1e-11));
    CHECK(integrate(n) == Approx(integrate(n0)).margin(1e-9));
}

TEST_CASE("spatially constant R = -1 multiplies mass by exp(-dt/eps)") {
    const RateModel decay(-1.0, mat1(0.0), vec1(0.0), 0.0); // R = -1 everywhere
    const GridField n0 = GridField::sample(Box::interval(-6, 6), {601}, [](const Vec& x) {
        return std::exp(-x.squaredNorm());
    });
    const double eps = 0.1, dt = 1e-3;
    const GridField n1 = step_parabolic(decay, n0, eps, dt);
    const double expect = integrate(n0) * std::exp(-dt / eps);
    CHECK(integrate(n1) == Approx(expect).margin(1e-8));
}

TEST_CASE("init_n0 reproduces the Gaussian mass oracle") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    // r was chosen from I0 / (psi(m0) pi^{d/2} / sqrt(det A0)) = 0.75 / sqrt(pi)
    CHECK(init.r == Approx(0.75 / std::sqrt(std::numbers::pi)));
    const Box box = Box::interval(-4, 5);
    double prev = -1.0;
    for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
        auto [n0, u0] = init_n0(model, init, eps, box, {1201});
        const double I0 = integrate_weighted(n0, [&](const Vec& x) { return model.psi(x); });
        // exact Gaussian integral: (r/sqrt(eps)) integral e^{-x^2/eps} = r sqrt(pi)
        CHECK(I0 == Approx(0.75).margin(1e-8));
        if (prev > 0.0) CHECK(I0 == Approx(prev).margin(1e-8)); // eps-independent
        prev = I0;
        // u_eps^0 carries the prefactor shift
        const double shift = eps * std::log(init.r / std::sqrt(eps));
        CHECK(u0[600] == Approx(init.u0(u0.node(600)) + shift).margin(1e-12));
    }
}

TEST_CASE("init_n0 rejects a shifted initial profile (max u0 != 0)") {
    const RateModel model = canonical_model();
    const InitialData bad = make_initial_data(model, vec1(0.0), mat1(1.0), -0.1);
    CHECK_THROWS_AS(init_n0(model, bad, 0.05, Box::interval(-4, 5), {801}),
                    std::invalid_argument);
}

TEST_CASE("init_n0 rejects inadmissible initial mass") {
    const RateModel model = canonical_model();
    // r forced so large that I_eps(0) >= I_M
    const InitialData heavy = make_initial_data(model, vec1(0.0), mat1(1.0), 0.0,
                                                10.0 / std::sqrt(std::numbers::pi));
    CHECK_THROWS_AS(init_n0(model, heavy, 0.05, Box::interval(-4, 5), {801}),
                    std::invalid_argument);
}

TEST_CASE("reaction-scale dt guard") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    auto [n0, u0] = init_n0(model, init, 0.05, Box::interval(-4, 5), {801});
    CHECK_THROWS_AS(step_parabolic(model, n0, 0.05, 0.1), step_rejected_error);
}

TEST_CASE("discrete steady profile barely drifts after a long pre-run") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    ParabolicConfig pc;
    pc.box = Box::interval(-6.5, 7.5);
    pc.n = {701};
    pc.T = 15.0;
    pc.sample_every = 1000;
    pc.cross_check = false;
    const double eps = 0.1;
    const EpsRunResult run = run_parabolic(model, init, eps, pc);
    // re-run a single step from the settled state via the standalone step
    // (recompute the final density from the stored series is not enough; use
    // a short continuation run instead)
    ParabolicConfig pc2 = pc;
    pc2.T = 15.0 + run.dt;
    pc2.sample_every = 1;
    const EpsRunResult run2 = run_parabolic(model, init, eps, pc2);
    const size_t n = run2.series.size();
    const double drift = std::abs(run2.series[n - 1].I - run2.series[n - 2].I);
    CHECK(drift <= 1e-6);
}

TEST_CASE("canonical run: monotone resource, box bound and sandwiches") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    ParabolicConfig pc;
    pc.box = Box::interval(-4.6, 5.6); // u <= -8 at the faces up to T = 3
    pc.n = {801};
    pc.T = 3.0;
    pc.sample_every = 20;
    const double eps = 0.05;
    const EpsRunResult run = run_parabolic(model, init, eps, pc);

    REQUIRE(run.primary == ParabolicForm::Density);
    CHECK(run.I_min > 0.0);
    CHECK(run.I_max_run <= model.I_max() + 1e-6); // fitted C collapses to 0 here
    CHECK(run.fitted_C <= 1e-2);
    // the finite-eps model dips by O(eps) inside the initial layer before the
    // expansion regime; past t ~ 3 eps the resource is monotone per sample
    CHECK(run.I_min >= init.I0 - 0.2 * eps);
    for (size_t k = 1; k < run.series.size(); ++k) {
        if (run.series[k].t < 3.0 * eps) continue;
        CHECK(run.series[k].I >= run.series[k - 1].I - 5e-4);
    }
    CHECK(run.series.back().I > 0.9);
    CHECK(run.mass_leak_events == 0);
    CHECK(run.sandwich.value_ok);
    CHECK(run.sandwich.hess_upper_ok);
    CHECK(run.sandwich.hess_lower_ok_tight);
    CHECK(run.sandwich.hess_lower_ok_loose);
    // psi-mass identity is structural
    for (const auto& s : run.series) CHECK(s.psi_mass == s.I);
    // cross-check of the two formulations stays at scheme accuracy
    CHECK(run.cross_check_max_dI >= 0.0);
    CHECK(run.cross_check_max_dI <= 1e-2);
}

TEST_CASE("|I_eps - I| at t = 1 roughly halves when eps halves") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    const QuadraticOracle oracle(model, init);
    const AnsatzHistory ref = oracle.integrate(1.0, 1e-4, 1);

    auto I_err = [&](double eps) {
        ParabolicConfig pc;
        pc.box = Box::interval(-4.3, 5.3);
        pc.n = {901};
        pc.T = 1.0;
        pc.sample_every = 5;
        pc.cross_check = false;
        const EpsRunResult run = run_parabolic(model, init, eps, pc);
        return std::abs(run.series.back().I - ref.back().I);
    };
    const double e1 = I_err(0.1);
    const double e2 = I_err(0.05);
    CHECK(e1 / e2 == Approx(2.0).margin(0.8)); // first-order in eps
}

TEST_CASE("scheme order: halving (h, dt) settles I_eps(T) at second order") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    const double eps = 0.1;
    auto I_at = [&](int n, double dt) {
        ParabolicConfig pc;
        pc.box = Box::interval(-4.3, 5.3);
        pc.n = {n};
        pc.dt = dt;
        pc.T = 1.0;
        pc.sample_every = 1000000;
        pc.cross_check = false;
        pc.run_sandwich_checks = false;
        return run_parabolic(model, init, eps, pc).series.back().I;
    };
    const double I1 = I_at(601, 4e-4);
    const double I2 = I_at(1201, 2e-4);
    const double I3 = I_at(2401, 1e-4);
    const double d12 = std::abs(I2 - I1), d23 = std::abs(I3 - I2);
    REQUIRE(d23 > 0.0);
    CHECK(d12 / d23 >= 3.0);
}

TEST_CASE("Hopf-Cole primary form runs at small eps") {
    const RateModel model = canonical_model();
    const InitialData init = canonical_init(model);
    ParabolicConfig pc;
    pc.box = Box::interval(-4.3, 5.3);
    pc.n = {1201};
    pc.T = 0.5;
    pc.sample_every = 50;
    const double eps = 0.0125;
    const EpsRunResult run = run_parabolic(model, init, eps, pc);
    REQUIRE(run.primary == ParabolicForm::HopfCole);
    CHECK(run.I_min > 0.0);
    CHECK(run.series.back().I > run.series.front().I);
    CHECK(run.series.back().x_peak[0] > 0.0); // moving toward theta
    CHECK(run.mass_leak_events == 0);
    CHECK(run.sandwich.value_ok);
    CHECK(run.sandwich.hess_upper_ok);
}

TEST_CASE("Hopf-Cole round trip is exact for representable magnitudes") {
    const double eps = 0.0125;
    for (double u : {-0.5, -2.0, -7.5}) {
        const double n = std::exp(u / eps);
        if (n > 0.0) CHECK(eps * std::log(n) == Approx(u).margin(1e-12));
    }
}
