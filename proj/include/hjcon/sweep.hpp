#ifndef HJCON_SWEEP_HPP
#define HJCON_SWEEP_HPP

#include <algorithm>
#include <cmath>
#include <future>
#include <vector>

#include "hjcon/hj_limit.hpp"
#include "hjcon/parabolic.hpp"
#include "hjcon/quadratic_oracle.hpp"

namespace hjcon {

// Box sized from the value envelope so that u <= boundary_level at the faces
// for all t <= T (density ~ e^{boundary_level/eps} is negligible there).
inline Box auto_box(const RateModel& model, const InitialData& init, double T,
                    double boundary_level = -8.0) {
    const SandwichEnvelope env = SandwichEnvelope::make(model, init, 0.0);
    const double rad2 = (env.L0_up + env.K0_bar * T - boundary_level) / env.L1_up;
    const double rad = std::sqrt(std::max(rad2, 1.0));
    const int d = model.dim();
    Vec lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
        lo[a] = model.theta()[a] - rad;
        hi[a] = model.theta()[a] + rad;
    }
    return Box(lo, hi);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    LinearFit f;
    const double den = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

struct MomentReport {
    double eps = 0.0;
    double t = 0.0;
    double m0 = 0.0;              // integral of n_eps
    Vec mean;                     // first moment / m0
    double second_central = 0.0;  // integral |x - mean|^2 n / m0
    double m0_vs_rho = 0.0;       // |m0 - I(t)/psi(xbar(t))|
    double mean_vs_xbar = 0.0;    // |mean - xbar(t)|_inf
};

// Concentration moments of a density snapshot against the limit trajectory
// (Dirac mass rho(t) delta(x - xbar(t)) with rho = I/psi(xbar)).
inline MomentReport concentration_check(const RateModel& model, const GridField& n_snapshot,
                                        double eps, const AnsatzSample& limit_state) {
    MomentReport rep;
    rep.eps = eps;
    rep.t = n_snapshot.t;
    rep.m0 = integrate(n_snapshot);
    const int d = model.dim();
    rep.mean = Vec::Zero(d);
    for (int a = 0; a < d; ++a)
        rep.mean[a] =
            integrate_weighted(n_snapshot, [&](const Vec& x) { return x[a]; }) / rep.m0;
    rep.second_central = integrate_weighted(n_snapshot, [&](const Vec& x) {
                             return (x - rep.mean).squaredNorm();
                         }) /
                         rep.m0;
    const double rho = limit_state.I / model.psi(limit_state.m);
    rep.m0_vs_rho = std::abs(rep.m0 - rho);
    rep.mean_vs_xbar = (rep.mean - limit_state.m).cwiseAbs().maxCoeff();
    return rep;
}

struct SweepConfig {
    std::vector<double> eps_ladder{0.1, 0.05, 0.025, 0.0125};
    std::vector<double> t_star{1.0};
    double grid_h_factor = 15.0; // h <= sqrt(eps) / factor, resolves the peak width
    Box box;                     // empty -> auto_box
    int sample_every = 5;
    bool concurrent = true;
    bool with_limit_reference = true; // cross-check oracle vs grid limit solver
    LimitConfig limit_ref;            // n/dt defaults below when n empty
    double u_probe_halfwidth = 1.0;   // sup-norm window around xbar for the u check
};

struct SweepEntry {
    double eps = 0.0;
    double t_star = 0.0;
    double t_actual = 0.0;   // snapshot time actually used
    double I_err_signed = 0.0;
    double I_err_abs = 0.0;
    double x_err_abs = 0.0;
    double u_err_sup = 0.0;  // || u_eps - eps log(r/eps^{d/2}) - u ||_inf near the peak
    double u1_scale = 0.0;   // u_err_sup / eps
};

struct SweepFit {
    double t_star = 0.0;
    double slope_I = 0.0;      // log-log slope of |I_eps - I| vs eps
    double slope_x = 0.0;
    double I1_first3 = 0.0;    // linear-term fits over the first / last three eps
    double I1_last3 = 0.0;
    double x1_first3 = 0.0;
    double x1_last3 = 0.0;
    bool u_monotone = false;   // u-field error decreasing along the ladder
};

struct SweepReport {
    std::vector<double> eps_ladder;
    std::vector<double> t_star;
    std::vector<SweepEntry> entries; // eps-major, then t*
    std::vector<SweepFit> fits;
    std::vector<MomentReport> moments; // per (eps, t*)
    bool oracle_reference = true;      // quadratic reduction vs grid limit solve
    double ref_I_agreement = 0.0;      // max |I_oracle - I_grid| over t* (oracle case)
    double ref_x_agreement = 0.0;
    std::vector<EpsRunResult> runs;    // retained per-eps artifacts
    std::vector<std::pair<double, std::string>> failures; // (eps, reason)
    bool complete() const { return failures.empty(); }
};

namespace detail {

// Limit reference: the quadratic reduction when applicable, otherwise a fine
// grid run of the limit solver with snapshots at the probe times.
struct LimitReference {
    bool use_oracle = false;
    AnsatzHistory oracle;
    TrajectoryRecord grid;
    std::vector<GridField> grid_u;

    AnsatzSample state_at(double t) const {
        if (use_oracle) return ansatz_at(oracle, t);
        const auto& ss = grid.samples;
        AnsatzSample out;
        if (t <= ss.front().t) {
            out.t = ss.front().t;
            out.m = ss.front().x;
            out.I = ss.front().I;
            return out;
        }
        size_t lo = 0;
        while (lo + 2 < ss.size() && ss[lo + 1].t <= t) ++lo;
        const double w = (t - ss[lo].t) / std::max(ss[lo + 1].t - ss[lo].t, 1e-300);
        out.t = t;
        out.m = (1.0 - w) * ss[lo].x + w * ss[lo + 1].x;
        out.I = (1.0 - w) * ss[lo].I + w * ss[lo + 1].I;
        return out;
    }

    // limit u at probe index q (the q-th t* snapshot) and position x
    double u_at(size_t q, double t, const Vec& x) const {
        if (use_oracle) {
            const AnsatzSample os = ansatz_at(oracle, t);
            const Vec z = x - os.m;
            return -z.dot(os.A * z);
        }
        return value_at(grid_u.at(q), x);
    }
};

} // namespace detail

inline SweepReport sweep(const RateModel& model, const InitialData& init, const SweepConfig& cfg) {
    if (cfg.eps_ladder.size() < 4)
        throw std::invalid_argument("sweep: need at least 4 eps values");
    for (size_t i = 1; i < cfg.eps_ladder.size(); ++i)
        if (!(cfg.eps_ladder[i] < cfg.eps_ladder[i - 1]))
            throw std::invalid_argument("sweep: eps ladder must be strictly decreasing");

    const double T = *std::max_element(cfg.t_star.begin(), cfg.t_star.end());
    const Box box = cfg.box.dim() == 0 ? auto_box(model, init, T) : cfg.box;

    SweepReport rep;
    rep.eps_ladder = cfg.eps_ladder;
    rep.t_star = cfg.t_star;

    // limit reference: the quadratic reduction when it applies (cross-checked
    // against the grid solver), else the grid solver itself
    detail::LimitReference ref;
    const bool need_grid = cfg.with_limit_reference;
    try {
        QuadraticOracle oracle(model, init);
        ref.use_oracle = true;
        ref.oracle = oracle.integrate(T, 1e-4, 10);
    } catch (const oracle_inapplicable_error&) {
        ref.use_oracle = false;
    }
    rep.oracle_reference = ref.use_oracle;
    if (need_grid || !ref.use_oracle) {
        LimitConfig lc = cfg.limit_ref;
        if (lc.n.empty()) {
            lc.box = box;
            lc.n.assign(model.dim(), model.dim() == 1 ? 1801 : 301);
            lc.dt = 2e-4;
            lc.sample_every = ref.use_oracle ? 25 : 5;
        }
        lc.T = T;
        lc.snapshot_times = cfg.t_star;
        LimitResult lim = solve_limit(model, init, lc);
        if (ref.use_oracle) {
            for (const auto& smp : lim.record.samples) {
                const AnsatzSample os = ansatz_at(ref.oracle, smp.t);
                rep.ref_I_agreement = std::max(rep.ref_I_agreement, std::abs(smp.I - os.I));
                rep.ref_x_agreement =
                    std::max(rep.ref_x_agreement, (smp.x - os.m).cwiseAbs().maxCoeff());
            }
        } else {
            ref.grid = std::move(lim.record);
            ref.grid_u = ref.grid.snapshots;
        }
    }

    // per-eps parabolic runs (independent state; safely concurrent)
    auto run_one = [&](double eps) {
        ParabolicConfig pc;
        pc.box = box;
        const double h_target = std::sqrt(eps) / cfg.grid_h_factor;
        pc.n.assign(model.dim(), 0);
        for (int a = 0; a < model.dim(); ++a)
            pc.n[a] = std::max(201, static_cast<int>(std::ceil(box.extent(a) / h_target)) + 1);
        pc.T = T;
        pc.sample_every = cfg.sample_every;
        pc.snapshot_times = cfg.t_star;
        return run_parabolic(model, init, eps, pc);
    };
    if (cfg.concurrent) {
        std::vector<std::future<EpsRunResult>> futs;
        for (double eps : cfg.eps_ladder)
            futs.push_back(std::async(std::launch::async, run_one, eps));
        for (size_t i = 0; i < futs.size(); ++i) {
            try {
                rep.runs.push_back(futs[i].get());
            } catch (const std::exception& e) {
                rep.failures.emplace_back(cfg.eps_ladder[i], e.what());
            }
        }
    } else {
        for (double eps : cfg.eps_ladder) {
            try {
                rep.runs.push_back(run_one(eps));
            } catch (const std::exception& e) {
                rep.failures.emplace_back(eps, e.what());
            }
        }
    }
    if (!rep.complete()) return rep; // partial artifacts retained, no fits

    // per (eps, t*) errors against the oracle
    for (size_t e = 0; e < rep.runs.size(); ++e) {
        const EpsRunResult& run = rep.runs[e];
        for (size_t q = 0; q < cfg.t_star.size(); ++q) {
            const GridField& usnap = run.u_snapshots.at(q);
            const GridField& nsnap = run.n_snapshots.at(q);
            const double t_act = usnap.t;
            const AnsatzSample os = ref.state_at(t_act);

            SweepEntry ent;
            ent.eps = run.eps;
            ent.t_star = cfg.t_star[q];
            ent.t_actual = t_act;

            // I and x at the snapshot time, linearly interpolated in the series
            const auto& series = run.series;
            size_t lo = 0;
            while (lo + 2 < series.size() && series[lo + 1].t <= t_act) ++lo;
            const double w =
                (t_act - series[lo].t) / std::max(series[lo + 1].t - series[lo].t, 1e-300);
            const double I_eps = (1.0 - w) * series[lo].I + w * series[lo + 1].I;
            const Vec x_eps = (1.0 - w) * series[lo].x_peak + w * series[lo + 1].x_peak;

            ent.I_err_signed = I_eps - os.I;
            ent.I_err_abs = std::abs(ent.I_err_signed);
            ent.x_err_abs = (x_eps - os.m).cwiseAbs().maxCoeff();

            // u-field error near the peak after removing the prefactor shift
            double sup = 0.0;
            for (long k = 0; k < usnap.size(); ++k) {
                const Vec x = usnap.node(k);
                bool inside = true;
                for (int a = 0; a < model.dim(); ++a)
                    if (std::abs(x[a] - os.m[a]) > cfg.u_probe_halfwidth) inside = false;
                if (!inside) continue;
                const double u_lim = ref.u_at(q, t_act, x);
                sup = std::max(sup, std::abs(usnap[k] - run.prefactor_shift - u_lim));
            }
            ent.u_err_sup = sup;
            ent.u1_scale = sup / run.eps;
            rep.entries.push_back(ent);

            rep.moments.push_back(concentration_check(model, nsnap, run.eps, os));
        }
    }

    // fits per t*
    for (size_t q = 0; q < cfg.t_star.size(); ++q) {
        SweepFit fit;
        fit.t_star = cfg.t_star[q];
        std::vector<double> eps, logeps, logI, logx, Ierr, xerr, uerr;
        for (const auto& ent : rep.entries) {
            if (ent.t_star != cfg.t_star[q]) continue;
            eps.push_back(ent.eps);
            logeps.push_back(std::log(ent.eps));
            logI.push_back(std::log(std::max(ent.I_err_abs, 1e-300)));
            logx.push_back(std::log(std::max(ent.x_err_abs, 1e-300)));
            Ierr.push_back(ent.I_err_signed);
            xerr.push_back(ent.x_err_abs);
            uerr.push_back(ent.u_err_sup);
        }
        fit.slope_I = fit_line(logeps, logI).slope;
        fit.slope_x = fit_line(logeps, logx).slope;
        auto sub = [](const std::vector<double>& v, size_t from, size_t count) {
            return std::vector<double>(v.begin() + from, v.begin() + from + count);
        };
        const size_t n = eps.size();
        fit.I1_first3 = fit_line(sub(eps, 0, 3), sub(Ierr, 0, 3)).slope;
        fit.I1_last3 = fit_line(sub(eps, n - 3, 3), sub(Ierr, n - 3, 3)).slope;
        fit.x1_first3 = fit_line(sub(eps, 0, 3), sub(xerr, 0, 3)).slope;
        fit.x1_last3 = fit_line(sub(eps, n - 3, 3), sub(xerr, n - 3, 3)).slope;
        fit.u_monotone = true;
        for (size_t i = 1; i < uerr.size(); ++i)
            if (!(uerr[i] < uerr[i - 1] + 1e-12)) fit.u_monotone = false;
        rep.fits.push_back(fit);
    }
    return rep;
}

} // namespace hjcon

#endif // HJCON_SWEEP_HPP
