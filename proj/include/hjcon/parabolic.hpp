#ifndef HJCON_PARABOLIC_HPP
#define HJCON_PARABOLIC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hjcon/errors.hpp"
#include "hjcon/grid.hpp"
#include "hjcon/hj_limit.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/rate_model.hpp"

namespace hjcon {

namespace detail {

// Thomas solve of a tridiagonal system; lower/diag/upper of length n
// (lower[0] and upper[n-1] unused). Overwrites rhs with the solution.
inline void thomas(std::vector<double>& lower, std::vector<double>& diag,
                   std::vector<double>& upper, std::vector<double>& rhs) {
    const int n = static_cast<int>(diag.size());
    for (int i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

enum class DiffusionClosure {
    ReflectingFV,  // zero-flux finite volume (mass-conserving; density form)
    Extrapolated   // quadratic-extrapolation ghosts (Hopf-Cole form)
};

// h^2-normalized action of the 1-d diffusion stencil along a line.
inline void apply_D_line(const double* v, int n, DiffusionClosure bc, double inv_h2,
                         double* out) {
    if (bc == DiffusionClosure::ReflectingFV) {
        out[0] = 2.0 * (v[1] - v[0]) * inv_h2;
        out[n - 1] = 2.0 * (v[n - 2] - v[n - 1]) * inv_h2;
    } else {
        // ghost from the local quadratic fit: second difference at the first
        // interior node
        out[0] = (v[0] - 2.0 * v[1] + v[2]) * inv_h2;
        out[n - 1] = (v[n - 1] - 2.0 * v[n - 2] + v[n - 3]) * inv_h2;
    }
    for (int i = 1; i < n - 1; ++i) out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv_h2;
}

// Solves (I - mu h^2 D) x = rhs along one line, mu = theta*eps*dt/h^2.
inline void solve_line(std::vector<double>& rhs, double mu, DiffusionClosure bc) {
    const int n = static_cast<int>(rhs.size());
    std::vector<double> lo(n, -mu), di(n, 1.0 + 2.0 * mu), up(n, -mu);
    if (bc == DiffusionClosure::ReflectingFV) {
        di[0] = 1.0 + 2.0 * mu;
        up[0] = -2.0 * mu;
        di[n - 1] = 1.0 + 2.0 * mu;
        lo[n - 1] = -2.0 * mu;
    } else {
        // corner rows (1-mu, 2mu, -mu) reduce against the first interior row
        // to (1, -1) exactly; same at the other end
        di[0] = 1.0;
        up[0] = -1.0;
        rhs[0] = rhs[0] - rhs[1];
        di[n - 1] = 1.0;
        lo[n - 1] = -1.0;
        rhs[n - 1] = rhs[n - 1] - rhs[n - 2];
    }
    thomas(lo, di, up, rhs);
}

} // namespace detail

// Crank-Nicolson step of dv/dt = eps * Laplacian v (ADI in 2-d).
inline void diffuse_cn(GridField& v, double eps, double dt, detail::DiffusionClosure bc) {
    using detail::apply_D_line;
    using detail::solve_line;
    if (v.dim() == 1) {
        const int n = v.n(0);
        const double inv_h2 = 1.0 / (v.h(0) * v.h(0));
        const double mu = 0.5 * eps * dt * inv_h2;
        std::vector<double> D(n), rhs(n);
        apply_D_line(v.values().data(), n, bc, inv_h2, D.data());
        for (int i = 0; i < n; ++i) rhs[i] = v[i] + 0.5 * eps * dt * D[i];
        // corner reduction needs the raw rhs relations, done inside solve_line
        solve_line(rhs, mu, bc);
        for (int i = 0; i < n; ++i) v[i] = rhs[i];
        return;
    }
    // Peaceman-Rachford ADI: x-implicit / y-explicit, then swapped.
    const int n0 = v.n(0), n1 = v.n(1);
    const double ih02 = 1.0 / (v.h(0) * v.h(0)), ih12 = 1.0 / (v.h(1) * v.h(1));
    const double mu0 = 0.5 * eps * dt * ih02, mu1 = 0.5 * eps * dt * ih12;
    std::vector<double> line(std::max(n0, n1)), D(std::max(n0, n1)), rhs(std::max(n0, n1));

    GridField half = v;
    for (int i = 0; i < n0; ++i) { // explicit y along each row
        for (int j = 0; j < n1; ++j) line[j] = v[v.flat(i, j)];
        apply_D_line(line.data(), n1, bc, ih12, D.data());
        for (int j = 0; j < n1; ++j) half[half.flat(i, j)] = line[j] + 0.5 * eps * dt * D[j];
    }
    for (int j = 0; j < n1; ++j) { // implicit x along each column
        rhs.resize(n0);
        for (int i = 0; i < n0; ++i) rhs[i] = half[half.flat(i, j)];
        solve_line(rhs, mu0, bc);
        for (int i = 0; i < n0; ++i) half[half.flat(i, j)] = rhs[i];
    }
    GridField full = half;
    for (int j = 0; j < n1; ++j) { // explicit x along each column
        for (int i = 0; i < n0; ++i) line[i] = half[half.flat(i, j)];
        apply_D_line(line.data(), n0, bc, ih02, D.data());
        for (int i = 0; i < n0; ++i) full[full.flat(i, j)] = line[i] + 0.5 * eps * dt * D[i];
    }
    for (int i = 0; i < n0; ++i) { // implicit y along each row
        rhs.resize(n1);
        for (int j = 0; j < n1; ++j) rhs[j] = full[full.flat(i, j)];
        solve_line(rhs, mu1, bc);
        for (int j = 0; j < n1; ++j) full[full.flat(i, j)] = rhs[j];
    }
    v = std::move(full);
}

// Nodal density n0 = (r / eps^{d/2}) e^{u0/eps} and u_eps^0 = u0 + eps log(r/eps^{d/2}).
// Checks 0 < I_eps(0) < I_M by quadrature.
inline std::pair<GridField, GridField> init_n0(const RateModel& model, const InitialData& init,
                                               double eps, const Box& box,
                                               const std::vector<int>& n) {
    init.require_admissible();
    if (!(eps > 0.0) || !(init.r > 0.0))
        throw std::invalid_argument("init_n0: need eps > 0 and r > 0");
    const int d = model.dim();
    const double pref = init.r / std::pow(eps, 0.5 * d);
    const double shift = eps * std::log(pref);
    GridField n0 = GridField::sample(box, n, [&](const Vec& x) {
        return pref * std::exp(init.u0(x) / eps);
    });
    GridField u0 = GridField::sample(box, n, [&](const Vec& x) { return init.u0(x) + shift; });
    const double I0 = integrate_weighted(n0, [&](const Vec& x) { return model.psi(x); });
    if (!(I0 > 0.0) || !(I0 < model.I_max()))
        throw std::invalid_argument("init_n0: inadmissible initial mass, I_eps(0) = " +
                                    format_double(I0) + " not in (0, I_M)");
    return {std::move(n0), std::move(u0)};
}

// One density-form step: Strang split of the stiff reaction (exact nodal
// exponential, I frozen at substep start) around an unconditionally stable
// Crank-Nicolson diffusion. dt is constrained by the reaction scale only.
inline GridField step_parabolic(const RateModel& model, const GridField& n_field, double eps,
                                double dt, double reaction_safety = 0.25) {
    HJGridOps ops(model, n_field.box(), n_field.shape()); // for qform/psi caches
    double maxR = 0.0;
    for (long k = 0; k < n_field.size(); ++k)
        maxR = std::max({maxR, std::abs(ops.source(k, 0.0)),
                         std::abs(ops.source(k, std::min(model.I_max(), 1e6)))});
    const double dt_ok = reaction_safety * eps / std::max(maxR, 1e-300);
    if (dt > dt_ok)
        throw step_rejected_error("step_parabolic: dt exceeds the reaction-scale bound (need dt <= " +
                                      format_double(dt_ok) + ")",
                                  dt_ok);

    auto resource = [&](const GridField& f) {
        return integrate_weighted(f, [&](const Vec& x) { return model.psi(x); });
    };
    auto react = [&](GridField& f, double tau, double I) {
        for (long k = 0; k < f.size(); ++k) f[k] *= std::exp(tau * ops.source(k, I) / eps);
    };
    // Strang split around the CN diffusion; the second reaction half re-sources
    // with the predicted end-of-step resource so the I coupling is trapezoidal
    const double I0 = resource(n_field);
    GridField pred = n_field;
    react(pred, 0.5 * dt, I0);
    diffuse_cn(pred, eps, dt, detail::DiffusionClosure::ReflectingFV);
    react(pred, 0.5 * dt, I0);
    const double I1 = resource(pred);

    GridField n = n_field;
    react(n, 0.5 * dt, I0);
    diffuse_cn(n, eps, dt, detail::DiffusionClosure::ReflectingFV);
    react(n, 0.5 * dt, I1);
    for (long k = 0; k < n.size(); ++k)
        if (!(n[k] > 0.0))
            throw numerical_error("step_parabolic: density lost positivity (bug signal)");
    n.t = n_field.t + dt;
    return n;
}

enum class ParabolicForm { Density, HopfCole };

struct ParabolicConfig {
    Box box;
    std::vector<int> n;
    double T = 1.0;
    double dt = 0.0; // 0 = automatic policy
    int sample_every = 10;
    std::vector<double> snapshot_times;
    double u_form_threshold = 0.0125; // eps <= threshold: Hopf-Cole primary
    bool cross_check = true;          // shadow the other form when eps > threshold
    Hamiltonian ham = Hamiltonian::Blended;
    double reaction_safety = 0.25;
    bool run_sandwich_checks = true;
};

struct EpsSample {
    double t = 0.0;
    double I = 0.0;        // integral of psi n (the resource)
    double mass = 0.0;     // integral of n
    double psi_mass = 0.0; // identical to I by definition
    Vec x_peak;
};

struct EpsRunResult {
    double eps = 0.0;
    ParabolicForm primary = ParabolicForm::Density;
    std::vector<EpsSample> series;
    std::vector<GridField> u_snapshots; // u_eps fields (prefactor included)
    std::vector<GridField> n_snapshots;
    SandwichDiagnostics sandwich;
    double cross_check_max_dI = -1.0; // max |I_density - I_hopfcole| over samples
    double I_min = std::numeric_limits<double>::infinity();
    double I_max_run = -std::numeric_limits<double>::infinity();
    double fitted_C = 0.0; // max(0, sup_t (I_eps - I_M)) / eps^2
    int mass_leak_events = 0;
    double h = 0.0, dt = 0.0, prefactor_shift = 0.0;
};

namespace detail {

struct ParabolicState {
    const RateModel* model;
    HJGridOps* ops;
    double eps;
    Hamiltonian ham;

    double resource_of_n(const GridField& n) const { return ops->weighted_mass(n); }
    GridField density_of_u(const GridField& u) const {
        GridField n = u;
        for (long k = 0; k < n.size(); ++k) n[k] = std::exp(u[k] / eps);
        return n;
    }
    void react(GridField& n, double tau, double I) const {
        for (long k = 0; k < n.size(); ++k) n[k] *= std::exp(tau * ops->source(k, I) / eps);
    }

    // density form: reaction(tau/2) -> CN diffusion(tau) -> reaction(tau/2),
    // with the second half re-sourced at the predicted end-of-step resource
    // (a frozen-I predictor pass) so the I coupling is trapezoidal in time
    void step_density(GridField& n, double tau) const {
        const double I0 = resource_of_n(n);
        GridField pred = n;
        react(pred, 0.5 * tau, I0);
        diffuse_cn(pred, eps, tau, DiffusionClosure::ReflectingFV);
        react(pred, 0.5 * tau, I0);
        const double I1 = resource_of_n(pred);
        react(n, 0.5 * tau, I0);
        diffuse_cn(n, eps, tau, DiffusionClosure::ReflectingFV);
        react(n, 0.5 * tau, I1);
    }
    // Hopf-Cole form: explicit |grad u|^2 + R half-steps around CN diffusion;
    // no 1/eps stiffness anywhere; same I predictor-corrector
    void step_hopf_cole(GridField& u, double tau) const {
        const double I0 = resource_of_n(density_of_u(u));
        GridField pred = u;
        pred = ops->step(pred, I0, I0, 0.5 * tau, ham);
        diffuse_cn(pred, eps, tau, DiffusionClosure::Extrapolated);
        pred = ops->step(pred, I0, I0, 0.5 * tau, ham);
        const double I1 = resource_of_n(density_of_u(pred));
        u = ops->step(u, I0, I0, 0.5 * tau, ham);
        diffuse_cn(u, eps, tau, DiffusionClosure::Extrapolated);
        u = ops->step(u, I1, I1, 0.5 * tau, ham);
    }
};

} // namespace detail

// Full time loop for one eps. The primary unknown is the density for
// eps > u_form_threshold (with an optional Hopf-Cole shadow run for
// cross-checking) and u_eps below it, where e^{u/eps} underflows.
inline EpsRunResult run_parabolic(const RateModel& model, const InitialData& init, double eps,
                                  const ParabolicConfig& cfg) {
    auto [n_field, u_field] = init_n0(model, init, eps, cfg.box, cfg.n);
    HJGridOps ops(model, cfg.box, cfg.n);
    detail::ParabolicState st{&model, &ops, eps, cfg.ham};

    EpsRunResult res;
    res.eps = eps;
    res.primary = eps <= cfg.u_form_threshold ? ParabolicForm::HopfCole : ParabolicForm::Density;
    const bool run_density = res.primary == ParabolicForm::Density;
    const bool run_hopfcole = !run_density || cfg.cross_check;
    res.prefactor_shift = eps * std::log(init.r / std::pow(eps, 0.5 * model.dim()));

    double hmax = u_field.h(0);
    for (int a = 1; a < u_field.dim(); ++a) hmax = std::max(hmax, u_field.h(a));
    res.h = hmax;

    // dt policy: reaction scale for the density form, advection CFL for the
    // Hopf-Cole form (the CN diffusion imposes no bound).
    double dt = cfg.dt;
    if (dt <= 0.0) {
        double maxR = 0.0;
        for (long k = 0; k < u_field.size(); ++k)
            maxR = std::max({maxR, std::abs(ops.source(k, 0.0)),
                             std::abs(ops.source(k, model.I_max()))});
        const double dt_react = cfg.reaction_safety * eps / std::max(maxR, 1e-300);
        const double dt_cfl = 0.8 * ops.cfl_dt(u_field); // Hamiltonian half-steps at dt/2
        dt = run_density ? dt_react : dt_cfl;
        if (run_hopfcole) dt = std::min(dt, dt_cfl);
    }
    const int n_steps = static_cast<int>(std::ceil(cfg.T / dt - 1e-12));
    dt = cfg.T / n_steps;
    res.dt = dt;

    const SandwichEnvelope env = SandwichEnvelope::make(model, init, eps);
    const double tol_diag = 10.0 * (hmax * hmax + dt) + 1e-8;
    const double u_floor = -600.0 * eps; // below this, e^{u/eps} is denormal noise

    std::vector<double> snaps = cfg.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    size_t next_snap = 0;

    auto sample_now = [&](double t) {
        GridField u_eps = run_density ? GridField(u_field.box(), u_field.shape(), t) : u_field;
        GridField n_now = run_density ? n_field : st.density_of_u(u_field);
        if (run_density)
            for (long k = 0; k < n_field.size(); ++k)
                u_eps[k] = eps * std::log(std::max(n_field[k], 1e-300));
        EpsSample s;
        s.t = t;
        s.I = st.resource_of_n(n_now);
        s.psi_mass = s.I; // definitional: same quadrature, same code path
        s.mass = integrate(n_now);
        s.x_peak = argmax_refined(u_eps).x;
        res.series.push_back(s);
        res.I_min = std::min(res.I_min, s.I);
        res.I_max_run = std::max(res.I_max_run, s.I);

        if (run_density && run_hopfcole) {
            const double I_shadow = st.resource_of_n(st.density_of_u(u_field));
            res.cross_check_max_dI = std::max(res.cross_check_max_dI, std::abs(s.I - I_shadow));
        }
        // boundary leak: boundary density above 1e-12 of the peak density
        double nb = 0.0, nmax = 0.0;
        for (long k = 0; k < n_now.size(); ++k) {
            nmax = std::max(nmax, n_now[k]);
            if (n_now.on_boundary(k)) nb = std::max(nb, n_now[k]);
        }
        if (nb > 1e-12 * nmax) ++res.mass_leak_events;

        if (cfg.run_sandwich_checks) {
            // diagnose on a Hopf-Cole field whenever one is evolved: u is the
            // primary smooth unknown there and resolves the whole box. A
            // density-only run diagnoses eps log n restricted to the strip
            // where the density resolves its own exponential tail.
            const bool diag_on_u = run_hopfcole;
            GridField u_tilde = diag_on_u ? u_field : u_eps;
            for (long k = 0; k < u_tilde.size(); ++k) u_tilde[k] -= res.prefactor_shift;
            int margin = 2;
            for (int a = 0; a < u_tilde.dim(); ++a)
                margin = std::max(margin, static_cast<int>(std::ceil(0.02 * u_tilde.n(a))));
            const double jump = diag_on_u ? 1e300 : 0.1 * eps;
            res.sandwich.merge(check_sandwich(u_tilde, env, t, tol_diag, tol_diag, margin,
                                              diag_on_u ? -1e300 : u_floor, jump));
        }
    };

    sample_now(0.0);
    for (int s = 0; s < n_steps; ++s) {
        if (run_density) st.step_density(n_field, dt);
        if (run_hopfcole) st.step_hopf_cole(u_field, dt);
        const double t = dt * (s + 1);
        n_field.t = u_field.t = t;
        if ((s + 1) % cfg.sample_every == 0 || s + 1 == n_steps) sample_now(t);
        if (next_snap < snaps.size() && std::abs(t - snaps[next_snap]) <= 0.5 * dt) {
            GridField u_eps = run_density ? GridField(u_field.box(), u_field.shape(), t) : u_field;
            if (run_density)
                for (long k = 0; k < n_field.size(); ++k)
                    u_eps[k] = eps * std::log(std::max(n_field[k], 1e-300));
            u_eps.t = t;
            res.u_snapshots.push_back(u_eps);
            GridField nn = run_density ? n_field : st.density_of_u(u_field);
            nn.t = t;
            res.n_snapshots.push_back(std::move(nn));
            ++next_snap;
        }
    }
    res.fitted_C = std::max(0.0, res.I_max_run - model.I_max()) / (eps * eps);
    return res;
}

} // namespace hjcon

#endif // HJCON_PARABOLIC_HPP
