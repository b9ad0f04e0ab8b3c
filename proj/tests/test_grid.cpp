#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "hjcon/grid.hpp"
#include "test_helpers.hpp"

using namespace hjcon;
using hjtest::vec1;

namespace {

GridField sample1d(double lo, double hi, int n, double (*f)(double)) {
    return GridField::sample(Box::interval(lo, hi), {n}, [&](const Vec& x) { return f(x[0]); });
}

// dense-scan argmax used as the independent reference for peak refinement
double brute_force_argmax(double (*f)(double), double lo, double hi, double step) {
    double best_x = lo, best = f(lo);
    for (double x = lo; x <= hi; x += step)
        if (f(x) > best) {
            best = f(x);
            best_x = x;
        }
    return best_x;
}

double quad_peak(double x) { return -(x - 0.3) * (x - 0.3); }
double cubic_peak(double x) {
    const double z = x - 0.3;
    return -z * z - 0.05 * z * z * z;
}

} // namespace

TEST_CASE("argmax is exact on quadratics") {
    const GridField g = sample1d(-3.0, 3.0, 601, quad_peak);
    const PeakInfo p = argmax_refined(g);
    CHECK(p.x[0] == Approx(0.3).margin(1e-10));
    CHECK(p.value == Approx(0.0).margin(1e-10));
}

TEST_CASE("argmax of a symmetric field sits at the center") {
    const GridField g = GridField::sample(Box::interval(-3.0, 3.0), {601},
                                          [](const Vec& x) { return -x.squaredNorm(); });
    const PeakInfo p = argmax_refined(g);
    CHECK(p.x[0] == Approx(0.0).margin(1e-12));
}

TEST_CASE("argmax refinement converges at second order (Richardson vs brute force)") {
    // the cubic's true peak, frozen from a dense scan
    const double x_true = brute_force_argmax(cubic_peak, 0.28, 0.32, 1e-7);
    REQUIRE(x_true == Approx(0.3).margin(1e-6));

    const GridField g1 = sample1d(-3.0, 3.0, 601, cubic_peak);  // h = 0.01
    const GridField g2 = sample1d(-3.0, 3.0, 1201, cubic_peak); // h = 0.005
    const double e1 = std::abs(argmax_refined(g1).x[0] - 0.3);
    const double e2 = std::abs(argmax_refined(g2).x[0] - 0.3);
    REQUIRE(e2 > 0.0);
    CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("argmax on the boundary raises peak-escaped") {
    const GridField g = GridField::sample(Box::interval(-1.0, 1.0), {201}, [](const Vec& x) {
        return -(x[0] - 2.0) * (x[0] - 2.0);
    });
    CHECK_THROWS_AS(argmax_refined(g), peak_escaped_error);
}

TEST_CASE("hessian_at is exact on quadratics") {
    const GridField g = sample1d(-3.0, 3.0, 601, quad_peak);
    CHECK(hessian_at(g, vec1(0.37))(0, 0) == Approx(-2.0).margin(1e-9));

    const GridField g2 = GridField::sample(Box::rect(-2, 2, -2, 2), {201, 201},
                                           [](const Vec& x) { return -x.squaredNorm(); });
    Vec p(2);
    p << 0.31, -0.4;
    const Mat H = hessian_at(g2, p);
    CHECK(H(0, 0) == Approx(-2.0).margin(1e-9));
    CHECK(H(1, 1) == Approx(-2.0).margin(1e-9));
    CHECK(H(0, 1) == Approx(0.0).margin(1e-9));
}

TEST_CASE("hessian_at converges at second order on a quartic") {
    auto quart = [](const Vec& x) { return -std::pow(x[0], 4); };
    // x = 1 is a node in both grids; analytic d2/dx2 = -12 x^2 = -12
    const GridField g1 = GridField::sample(Box::interval(-2, 2), {401}, quart);  // h = 0.01
    const GridField g2 = GridField::sample(Box::interval(-2, 2), {801}, quart);  // h = 0.005
    const double e1 = std::abs(hessian_at(g1, vec1(1.0))(0, 0) - (-12.0));
    const double e2 = std::abs(hessian_at(g2, vec1(1.0))(0, 0) - (-12.0));
    CHECK(e1 / e2 == Approx(4.0).epsilon(0.15));
}

TEST_CASE("hessian_at outside the stencil margin throws") {
    const GridField g = sample1d(-1.0, 1.0, 101, quad_peak);
    CHECK_THROWS_AS(hessian_at(g, vec1(1.5)), out_of_domain_error);
}

TEST_CASE("Simpson quadrature integrates smooth profiles to high order") {
    // polynomial up to cubic: exact
    const GridField cube = GridField::sample(Box::interval(0, 1), {101},
                                             [](const Vec& x) { return x[0] * x[0] * x[0]; });
    CHECK(integrate(cube) == Approx(0.25).margin(1e-14));
    // Gaussian mass
    const GridField gauss = GridField::sample(Box::interval(-8, 8), {801}, [](const Vec& x) {
        return std::exp(-x.squaredNorm());
    });
    CHECK(integrate(gauss) == Approx(std::sqrt(std::numbers::pi)).margin(1e-12));
    // even node count exercises the 3/8 tail
    const GridField gauss2 = GridField::sample(Box::interval(-8, 8), {800}, [](const Vec& x) {
        return std::exp(-x.squaredNorm());
    });
    CHECK(integrate(gauss2) == Approx(std::sqrt(std::numbers::pi)).margin(1e-10));
}

TEST_CASE("second differences of a quadratic are constant") {
    const GridField g = sample1d(-2.0, 2.0, 401, quad_peak);
    const SecondDiffRange r = second_diff_range(g);
    CHECK(r.min == Approx(-2.0).margin(1e-8));
    CHECK(r.max == Approx(-2.0).margin(1e-8));
}

TEST_CASE("snapshot binary round trip is bit exact") {
    const GridField g = GridField::sample(Box::rect(-1, 2, 0, 1), {41, 17},
                                          [](const Vec& x) { return std::sin(x[0]) + x[1]; }, 2.5);
    const std::string path = (std::filesystem::temp_directory_path() / "hjcon_snap_test.bin").string();
    write_snapshot(path, g);
    const GridField back = read_snapshot(path);
    REQUIRE(back.dim() == 2);
    REQUIRE(back.shape() == g.shape());
    CHECK(back.t == g.t);
    for (long k = 0; k < g.size(); ++k) REQUIRE(back[k] == g[k]);
    std::filesystem::remove(path);
}

TEST_CASE("gradient_at extrapolates linearly beyond the box") {
    const GridField g = sample1d(-1.0, 1.0, 201, quad_peak); // grad = -2(x-0.3)
    bool clipped = false;
    const Vec gr = gradient_at(g, vec1(1.4), true, &clipped);
    CHECK(clipped);
    CHECK(gr[0] == Approx(-2.0 * (1.4 - 0.3)).margin(1e-9));
}
