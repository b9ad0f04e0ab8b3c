#ifndef HJCON_HJ_LIMIT_HPP
#define HJCON_HJ_LIMIT_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hjcon/errors.hpp"
#include "hjcon/grid.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/quadratic_oracle.hpp"
#include "hjcon/rate_model.hpp"
#include "hjcon/trajectory.hpp"

namespace hjcon {

enum class Hamiltonian { LocalLaxFriedrichs, Godunov, Central, Blended };

namespace detail {

// Numerical Hamiltonian for H(p) = p^2 along one axis, from the one-sided
// slopes dm = D^-u, dp = D^+u.
//  - LocalLaxFriedrichs: H(pbar) + (alpha/2)(D+ - D-), alpha = 2 max|D|.
//    (For u_t = +H the viscosity enters with a plus sign.)
//  - Godunov: exact monotone flux; zero dissipation at concave vertices,
//    first-order biased in steep monotone regions.
//  - Central: H(pbar); second order, for smooth short-horizon runs only.
//  - Blended: central below a slope threshold, local Lax-Friedrichs above,
//    smoothly mixed. The solution is classical and concave near its peak, so
//    the second-order central flux is both stable (tiny local CFL) and free
//    of the trailing first-order wake the upwind fluxes drag behind a moving
//    peak; the steep far field keeps the monotone viscosity.
inline double axis_hamiltonian(double dm, double dp, Hamiltonian ham) {
    const double pb = 0.5 * (dm + dp);
    switch (ham) {
        case Hamiltonian::LocalLaxFriedrichs:
            return pb * pb + std::max(std::abs(dm), std::abs(dp)) * (dp - dm);
        case Hamiltonian::Godunov:
            if (dm <= dp) return std::max(dm * dm, dp * dp);
            return (dp <= 0.0 && 0.0 <= dm) ? 0.0 : std::min(dm * dm, dp * dp);
        case Hamiltonian::Blended: {
            // central is stable for |p| dt / h well below 1; viscosity ramps
            // in smoothly (C^1) on steep slopes only, so the coefficient has
            // no kink that could imprint on second differences
            const double p_on = 2.0, p_full = 3.5;
            const double s = std::clamp((std::abs(pb) - p_on) / (p_full - p_on), 0.0, 1.0);
            const double sigma = s * s * (3.0 - 2.0 * s);
            return pb * pb + sigma * std::max(std::abs(dm), std::abs(dp)) * (dp - dm);
        }
        case Hamiltonian::Central:
        default:
            return pb * pb;
    }
}

} // namespace detail

// Spatial operator L(u) = H_num(grad u) + R(x, I) on a fixed grid, with
// boundary ghosts extrapolated from the local quadratic fit (exact for
// quadratic far fields). |grad u|^2 is discretized per axis by one of the
// fluxes documented at axis_hamiltonian.
class HJGridOps {
  public:
    HJGridOps(const RateModel& model, const Box& box, const std::vector<int>& n)
        : model_(&model), proto_(box, n) {
        qform_.resize(proto_.size());
        psi_.resize(proto_.size());
        for (long k = 0; k < proto_.size(); ++k) {
            const Vec x = proto_.node(k);
            qform_[k] = model.quad_form(x);
            psi_[k] = model.psi(x);
        }
    }

    const GridField& proto() const { return proto_; }
    const std::vector<double>& qform() const { return qform_; }

    // integral of psi * f over the grid (composite Simpson, cached psi nodes)
    double weighted_mass(const GridField& f) const {
        if (weights_.empty()) {
            weights_.resize(proto_.size());
            const auto w0 = detail_simpson(proto_, 0);
            if (proto_.dim() == 1) {
                for (long k = 0; k < proto_.size(); ++k) weights_[k] = w0[k] * psi_[k];
            } else {
                const auto w1 = detail_simpson(proto_, 1);
                for (int i = 0; i < proto_.n(0); ++i)
                    for (int j = 0; j < proto_.n(1); ++j) {
                        const long k = proto_.flat(i, j);
                        weights_[k] = w0[i] * w1[j] * psi_[k];
                    }
            }
        }
        double acc = 0.0;
        for (long k = 0; k < f.size(); ++k) acc += weights_[k] * f[k];
        return acc;
    }

    double source(long k, double I) const {
        return model_->a() - (1.0 + model_->kappa() * I) * qform_[k] - model_->c() * I;
    }

    // out := H_num(u) + R(x, I)
    void apply(const GridField& u, double I, Hamiltonian ham, std::vector<double>& out) const {
        out.resize(u.size());
        if (u.dim() == 1) {
            const int n = u.n(0);
            const double h = u.h(0);
            for (int i = 0; i < n; ++i) {
                const double um = i > 0 ? u[i - 1] : 3.0 * u[0] - 3.0 * u[1] + u[2];
                const double up = i < n - 1 ? u[i + 1] : 3.0 * u[n - 1] - 3.0 * u[n - 2] + u[n - 3];
                const double dm = (u[i] - um) / h, dp = (up - u[i]) / h;
                out[i] = detail::axis_hamiltonian(dm, dp, ham) + source(i, I);
            }
            return;
        }
        const int n0 = u.n(0), n1 = u.n(1);
        const double h0 = u.h(0), h1 = u.h(1);
        for (int i = 0; i < n0; ++i)
            for (int j = 0; j < n1; ++j) {
                const long k = u.flat(i, j);
                const double umx = i > 0 ? u[u.flat(i - 1, j)]
                                         : 3.0 * u[u.flat(0, j)] - 3.0 * u[u.flat(1, j)] + u[u.flat(2, j)];
                const double upx = i < n0 - 1
                                       ? u[u.flat(i + 1, j)]
                                       : 3.0 * u[u.flat(n0 - 1, j)] - 3.0 * u[u.flat(n0 - 2, j)] +
                                             u[u.flat(n0 - 3, j)];
                const double umy = j > 0 ? u[u.flat(i, j - 1)]
                                         : 3.0 * u[u.flat(i, 0)] - 3.0 * u[u.flat(i, 1)] + u[u.flat(i, 2)];
                const double upy = j < n1 - 1
                                       ? u[u.flat(i, j + 1)]
                                       : 3.0 * u[u.flat(i, n1 - 1)] - 3.0 * u[u.flat(i, n1 - 2)] +
                                             u[u.flat(i, n1 - 3)];
                const double dmx = (u[k] - umx) / h0, dpx = (upx - u[k]) / h0;
                const double dmy = (u[k] - umy) / h1, dpy = (upy - u[k]) / h1;
                out[k] = detail::axis_hamiltonian(dmx, dpx, ham) +
                         detail::axis_hamiltonian(dmy, dpy, ham) + source(k, I);
            }
    }

    // Largest stable step, dt <= h / (2 max|grad u| + safety).
    double cfl_dt(const GridField& u, double safety = 1e-10) const {
        double hmin = u.h(0);
        for (int a = 1; a < u.dim(); ++a) hmin = std::min(hmin, u.h(a));
        return hmin / (2.0 * max_grad_l1(u) + safety);
    }

    void check_cfl(const GridField& u, double dt) const {
        const double dt_ok = cfl_dt(u);
        if (dt > dt_ok)
            throw step_rejected_error(
                "step_u: CFL violated (dt = " + format_double(dt) +
                    ", need dt <= " + format_double(dt_ok) + ")",
                dt_ok);
    }

    // One SSP-RK2 (Heun) step; the source uses I0 in the first stage and I1
    // in the second, i.e. a trapezoid in time when I0 != I1.
    GridField step(const GridField& u, double I0, double I1, double dt, Hamiltonian ham,
                   bool enforce_cfl = true) const {
        if (enforce_cfl) check_cfl(u, dt);
        GridField u1 = u;
        std::vector<double> L(u.size());
        apply(u, I0, ham, L);
        for (long k = 0; k < u.size(); ++k) u1[k] = u[k] + dt * L[k];
        apply(u1, I1, ham, L);
        GridField out = u;
        for (long k = 0; k < u.size(); ++k) out[k] = 0.5 * (u[k] + u1[k] + dt * L[k]);
        out.t = u.t + dt;
        return out;
    }

  private:
    static std::vector<double> detail_simpson(const GridField& g, int axis) {
        return detail::simpson_weights(g.n(axis), g.h(axis));
    }

    const RateModel* model_;
    GridField proto_;
    std::vector<double> qform_;
    std::vector<double> psi_;
    mutable std::vector<double> weights_;
};

// Single-step interface used by tests and by other modules.
inline GridField step_u(const RateModel& model, const GridField& u, double I, double dt,
                        Hamiltonian ham = Hamiltonian::LocalLaxFriedrichs) {
    HJGridOps ops(model, u.box(), u.shape());
    return ops.step(u, I, I, dt, ham);
}

struct LimitConfig {
    Box box;
    std::vector<int> n;
    double dt = 1e-3;
    double T = 1.0;
    int sample_every = 10;
    std::vector<double> snapshot_times;
    double proj_threshold = 1e-3;
    Hamiltonian ham = Hamiltonian::Blended;
    double tol_root = 1e-12;
    int hessian_window = 5; // wide fit guards the monotone-flux configurations
    bool run_sandwich_checks = true;
};

struct LimitResult {
    TrajectoryRecord record;
    SandwichDiagnostics sandwich;
    std::vector<double> projection_times;
    double max_constraint_residual = 0.0; // max over samples of |max_x u|
    double max_R_residual = 0.0;
    double h = 0.0, dt = 0.0;
};

// Grid solver for the constrained problem via the reformulated system:
//   (i)  advance xbar by its ODE (Heun; Hessian of u at matching time levels),
//   (ii) I from the algebraic constraint R(xbar, I) = 0,
//   (iii) advance u with that I (trapezoid of the two endpoint I values).
// max_x u is monitored as a residual; projection u -= max u fires only above
// proj_threshold and every event is recorded.
inline LimitResult solve_limit(const RateModel& model, const InitialData& init,
                               const LimitConfig& cfg) {
    init.require_admissible();
    const int n_steps = static_cast<int>(std::ceil(cfg.T / cfg.dt - 1e-12));
    const double dt = cfg.T / n_steps;

    HJGridOps ops(model, cfg.box, cfg.n);
    GridField u = GridField::sample(cfg.box, cfg.n, [&](const Vec& x) { return init.u0(x); });
    const SandwichEnvelope env = SandwichEnvelope::make(model, init, 0.0);

    double hmax = u.h(0);
    for (int a = 1; a < u.dim(); ++a) hmax = std::max(hmax, u.h(a));
    const double tol_diag = 10.0 * (hmax * hmax + dt) + 1e-8;

    Vec xbar = init.m0;
    double I = init.I0;

    LimitResult res;
    res.h = hmax;
    res.dt = dt;

    auto trait_rhs = [&](const GridField& ufield, const Vec& x, double Ival) {
        Mat negH;
        try {
            negH = -hessian_at(ufield, x, cfg.hessian_window);
        } catch (const out_of_domain_error&) {
            throw peak_escaped_error("solve_limit: trait ODE left the domain interior");
        }
        return solve_spd(symmetrize(negH), model.rate_grad_x(x, Ival)).eval();
    };

    auto record_sample = [&](double t) {
        const PeakInfo peak = argmax_refined(u);
        TrajectorySample s;
        s.t = t;
        s.x = xbar;
        s.I = I;
        s.rho = I / model.psi(xbar);
        s.max_u_residual = std::abs(peak.value);
        s.R_residual = std::abs(model.rate(xbar, I));
        res.record.samples.push_back(s);
        res.max_constraint_residual = std::max(res.max_constraint_residual, s.max_u_residual);
        res.max_R_residual = std::max(res.max_R_residual, s.R_residual);
        if (cfg.run_sandwich_checks)
            res.sandwich.merge(check_sandwich(u, env, t, tol_diag, tol_diag));
        if (s.max_u_residual > cfg.proj_threshold) {
            for (long k = 0; k < u.size(); ++k) u[k] -= peak.value;
            res.projection_times.push_back(t);
        }
    };

    record_sample(0.0);

    std::vector<double> snaps = cfg.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    size_t next_snap = 0;
    std::vector<double> L0(u.size()), L1(u.size());
    GridField u_stage = u;

    for (int s = 0; s < n_steps; ++s) {
        const double t = s * dt;
        ops.check_cfl(u, dt);

        // shared first stage of the u step
        ops.apply(u, I, cfg.ham, L0);
        for (long k = 0; k < u.size(); ++k) u_stage[k] = u[k] + dt * L0[k];

        // provisional end-of-step field with frozen I (for the stage-2 Hessian)
        ops.apply(u_stage, I, cfg.ham, L1);
        GridField u_prov = u;
        for (long k = 0; k < u.size(); ++k) u_prov[k] = 0.5 * (u[k] + u_stage[k] + dt * L1[k]);

        // Heun for the trait ODE at matching time levels
        const Vec f1 = trait_rhs(u, xbar, I);
        const Vec x_star = xbar + dt * f1;
        const double I_star = model.solve_I_for_zero(x_star, cfg.tol_root);
        const Vec f2 = trait_rhs(u_prov, x_star, I_star);
        xbar += 0.5 * dt * (f1 + f2);
        const double I_new = model.solve_I_for_zero(xbar, cfg.tol_root);

        // final u step: second stage re-sourced with I_new (cheap correction,
        // exactly equal to re-running the stage with the trapezoid source)
        for (long k = 0; k < u.size(); ++k)
            u[k] = u_prov[k] + 0.5 * dt * (ops.source(k, I_new) - ops.source(k, I));
        u.t = t + dt;
        I = I_new;

        if ((s + 1) % cfg.sample_every == 0 || s + 1 == n_steps) record_sample(t + dt);
        if (next_snap < snaps.size() && std::abs(t + dt - snaps[next_snap]) <= 0.5 * dt) {
            res.record.snapshots.push_back(u);
            ++next_snap;
        }
    }
    res.record.projection_events = static_cast<int>(res.projection_times.size());
    return res;
}

} // namespace hjcon

#endif // HJCON_HJ_LIMIT_HPP
