#ifndef HJCON_INITIAL_DATA_HPP
#define HJCON_INITIAL_DATA_HPP

#include <cmath>
#include <functional>
#include <numbers>

#include "hjcon/errors.hpp"
#include "hjcon/linalg.hpp"
#include "hjcon/rate_model.hpp"

namespace hjcon {

// Concave initial datum. Either the quadratic form
//     u0(x) = -(x - m0)' A0 (x - m0) + offset
// with A0 symmetric positive definite, or a tabulated concave field (set via
// make_initial_data_from_field in grid.hpp), in which case (m0, A0) hold the
// fitted peak and curvature and `tab` evaluates the field. offset must be 0
// for an admissible run (max u0 = 0); it exists so that seeded violations
// can be expressed.
//
// The sandwich constants are stated in the theta-centered frame y = x - theta
// (the maximizer normalization is a translation):
//     -L0_lo - L1_lo |y|^2 <= u0(y) <= L0_up - L1_up |y|^2,
//     -2 L1_lo <= D^2 u0 <= -2 L1_up.
struct InitialData {
    Vec m0;
    Mat A0;
    double offset = 0.0;
    double I0 = 0.0;  // solves R(m0, I0) = 0
    double r = 0.0;   // Hopf-Cole mass prefactor: n0 = (r / eps^{d/2}) e^{u0/eps}

    double L0_up = 0.0, L1_up = 0.0;
    double L0_lo = 0.0, L1_lo = 0.0;

    std::function<double(const Vec&)> tab; // set for tabulated data

    int dim() const { return static_cast<int>(m0.size()); }
    bool tabulated() const { return static_cast<bool>(tab); }

    double u0(const Vec& x) const {
        if (tab) return tab(x);
        const Vec z = x - m0;
        return -z.dot(A0 * z) + offset;
    }

    bool is_centered_max_zero(double tol = 1e-9) const { return std::abs(offset) <= tol; }

    void require_admissible() const {
        if (!is_centered_max_zero())
            throw std::invalid_argument("InitialData: max u0 must equal 0 (offset != 0)");
    }
};

// Builds InitialData for a model: I0 from the constraint R(m0, I0) = 0 and,
// unless given, r from the leading-order Gaussian mass
//     integral of psi n0 -> r psi(m0) pi^{d/2} / sqrt(det A0)   (eps -> 0)
// so that I_eps(0) matches I0.
inline InitialData make_initial_data(const RateModel& model, Vec m0, Mat A0,
                                     double offset = 0.0, double r_explicit = -1.0) {
    if (m0.size() != model.dim() || A0.rows() != model.dim() || A0.cols() != model.dim())
        throw std::invalid_argument("make_initial_data: dimension mismatch");
    if (!is_spd(A0))
        throw std::invalid_argument("make_initial_data: A0 must be symmetric positive definite");

    InitialData init;
    init.m0 = std::move(m0);
    init.A0 = symmetrize(A0);
    init.offset = offset;
    init.I0 = model.solve_I_for_zero(init.m0);

    const int d = model.dim();
    const double detA = init.A0.determinant();
    const double gauss = model.psi(init.m0) * std::pow(std::numbers::pi, 0.5 * d) / std::sqrt(detA);
    init.r = r_explicit > 0.0 ? r_explicit : init.I0 / gauss;

    // Sandwich constants, centered at theta. Tight when the peak sits at the
    // maximizer; otherwise a split |y - w|^2 >= |y|^2/2 - |w|^2 is used.
    const EigRange eigA = sym_eig_range(init.A0);
    const double w2 = (init.m0 - model.theta()).squaredNorm();
    if (w2 == 0.0) {
        init.L0_up = 0.0;
        init.L1_up = eigA.min;
        init.L0_lo = 0.0;
        init.L1_lo = eigA.max;
    } else {
        init.L0_up = eigA.min * w2;
        init.L1_up = 0.5 * eigA.min;
        init.L0_lo = 2.0 * eigA.max * w2;
        init.L1_lo = 2.0 * eigA.max;
    }
    return init;
}

// Time-dependent sandwich envelopes for u (eps = 0 allowed).
//
// The flat upper Hessian bound -2 L1_up only persists when the initial
// concavity does not exceed the Riccati equilibrium sqrt(K1_bar)/2; the
// envelope therefore uses the persistent constant min(L1_up, sqrt(K1_bar)/2)
// (and symmetrically max(L1_lo, sqrt(K1_under)/2) below). The lower Hessian
// envelope's growth rate is configurable: the printed bound allows 2 K1_under t,
// a tighter reading allows K1_under t; both are reported.
struct SandwichEnvelope {
    int d = 1;
    double eps = 0.0;
    double L0_up = 0.0, L1_up = 0.0;
    double L0_lo = 0.0, L1_lo = 0.0;
    double K0_bar = 0.0, K1_bar = 0.0, K1_under = 0.0;
    Vec center; // theta

    static SandwichEnvelope make(const RateModel& model, const InitialData& init, double eps) {
        SandwichEnvelope env;
        env.d = model.dim();
        env.eps = eps;
        env.K0_bar = model.a();
        const EigRange eigB = sym_eig_range(model.B());
        env.K1_bar = eigB.min;
        env.K1_under = (1.0 + model.kappa() * model.I_max()) * eigB.max;
        env.L0_up = init.L0_up;
        env.L1_up = std::min(init.L1_up, 0.5 * std::sqrt(std::max(env.K1_bar, 0.0)));
        env.L0_lo = init.L0_lo;
        env.L1_lo = std::max(init.L1_lo, 0.5 * std::sqrt(std::max(env.K1_under, 0.0)));
        env.center = model.theta();
        return env;
    }

    double value_upper(double t, double y2) const {
        return L0_up - L1_up * y2 + (K0_bar + 2.0 * d * eps * L1_up) * t;
    }
    double value_lower(double t, double y2) const {
        return -L0_lo - L1_lo * y2 - 2.0 * d * eps * L1_lo * t;
    }
    double hess_upper(double) const { return -2.0 * L1_up; }
    double hess_lower(double t, double growth_factor) const {
        return -2.0 * (L1_lo + growth_factor * K1_under * t);
    }
};

// Worst margins of the sandwich diagnostics accumulated over a run. Margins
// are signed distances to the envelope: negative means a violation deeper
// than the tolerance used by the caller.
struct SandwichDiagnostics {
    bool value_ok = true;
    bool hess_upper_ok = true;
    bool hess_lower_ok_tight = true; // growth K1_under * t
    bool hess_lower_ok_loose = true; // growth 2 K1_under * t
    double min_value_margin_up = std::numeric_limits<double>::infinity();
    double min_value_margin_lo = std::numeric_limits<double>::infinity();
    double min_hess_margin_up = std::numeric_limits<double>::infinity();
    double min_hess_margin_lo_tight = std::numeric_limits<double>::infinity();
    double min_hess_margin_lo_loose = std::numeric_limits<double>::infinity();
    long nodes_checked = 0;

    void merge(const SandwichDiagnostics& o) {
        value_ok &= o.value_ok;
        hess_upper_ok &= o.hess_upper_ok;
        hess_lower_ok_tight &= o.hess_lower_ok_tight;
        hess_lower_ok_loose &= o.hess_lower_ok_loose;
        min_value_margin_up = std::min(min_value_margin_up, o.min_value_margin_up);
        min_value_margin_lo = std::min(min_value_margin_lo, o.min_value_margin_lo);
        min_hess_margin_up = std::min(min_hess_margin_up, o.min_hess_margin_up);
        min_hess_margin_lo_tight = std::min(min_hess_margin_lo_tight, o.min_hess_margin_lo_tight);
        min_hess_margin_lo_loose = std::min(min_hess_margin_lo_loose, o.min_hess_margin_lo_loose);
        nodes_checked += o.nodes_checked;
    }
};

} // namespace hjcon

#endif // HJCON_INITIAL_DATA_HPP
