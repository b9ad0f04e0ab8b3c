#ifndef HJCON_FIXED_POINT_HPP
#define HJCON_FIXED_POINT_HPP

#include <cmath>
#include <random>
#include <vector>

#include "hjcon/errors.hpp"
#include "hjcon/grid.hpp"
#include "hjcon/hj_limit.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/rate_model.hpp"

namespace hjcon {

// Candidate trait path on [0, delta], uniform samples, x[0] anchored.
struct TraitPath {
    double delta = 0.0;
    std::vector<Vec> x;

    int segments() const { return static_cast<int>(x.size()) - 1; }
    double dt() const { return delta / segments(); }
    double time(int k) const { return delta * k / segments(); }

    static TraitPath constant(const Vec& x0, double delta, int n_samples) {
        TraitPath p;
        p.delta = delta;
        p.x.assign(n_samples, x0);
        return p;
    }
};

struct ResourcePath {
    double delta = 0.0;
    std::vector<double> I;

    double dt() const { return delta / (I.size() - 1); }
    static ResourcePath constant(double I0, double delta, int n_samples) {
        ResourcePath p;
        p.delta = delta;
        p.I.assign(n_samples, I0);
        return p;
    }
};

inline double path_distance(const TraitPath& a, const TraitPath& b) {
    if (a.x.size() != b.x.size())
        throw std::invalid_argument("path_distance: sample counts differ");
    double d = 0.0;
    for (size_t k = 0; k < a.x.size(); ++k)
        d = std::max(d, (a.x[k] - b.x[k]).cwiseAbs().maxCoeff());
    return d;
}

// Pointwise solve of R(x(t), I(t)) = 0 along the path; reports the first
// failing time if the trait leaves the viable region.
inline ResourcePath path_to_resource(const RateModel& model, const TraitPath& path,
                                     double tol_root = 1e-12) {
    ResourcePath out;
    out.delta = path.delta;
    out.I.reserve(path.x.size());
    for (size_t k = 0; k < path.x.size(); ++k) {
        try {
            out.I.push_back(model.solve_I_for_zero(path.x[k], tol_root));
        } catch (const no_positive_root_error&) {
            throw no_positive_root_error("path_to_resource: R(x(t),0) <= 0 first at t = " +
                                         format_double(path.time(static_cast<int>(k))));
        }
    }
    return out;
}

struct PhiConfig {
    Box box;
    std::vector<int> n;
    int substeps = 0; // PDE substeps per path interval; 0 = auto from CFL
    Hamiltonian ham = Hamiltonian::Central; // short smooth horizons
    double ball_radius = 0.2;
    double tol_root = 1e-12;
    int hessian_window = 5;
};

// Unconstrained HJ solve dv/dt = |grad v|^2 + R(x, I(t)), v(0) = u0, with a
// prescribed resource path; returns v at every path sample time.
inline std::vector<GridField> solve_v(const RateModel& model, const ResourcePath& ipath,
                                      const InitialData& init, const PhiConfig& cfg) {
    init.require_admissible();
    for (double I : ipath.I)
        if (I < -1e-12 || I > model.I_max() * (1.0 + 1e-9))
            throw std::invalid_argument("solve_v: resource path leaves [0, I_M]");

    HJGridOps ops(model, cfg.box, cfg.n);
    GridField v = GridField::sample(cfg.box, cfg.n, [&](const Vec& x) { return init.u0(x); });

    int sub = cfg.substeps;
    if (sub <= 0) {
        const double dt_cfl = 0.8 * ops.cfl_dt(v);
        sub = std::max(1, static_cast<int>(std::ceil(ipath.dt() / dt_cfl)));
    }
    const double dtau = ipath.dt() / sub;

    std::vector<GridField> hist;
    hist.reserve(ipath.I.size());
    hist.push_back(v);
    for (size_t k = 0; k + 1 < ipath.I.size(); ++k) {
        const double I0 = ipath.I[k], I1 = ipath.I[k + 1];
        for (int s = 0; s < sub; ++s) {
            const double a0 = (s + 0.0) / sub, a1 = (s + 1.0) / sub;
            v = ops.step(v, (1.0 - a0) * I0 + a0 * I1, (1.0 - a1) * I0 + a1 * I1, dtau, cfg.ham);
        }
        hist.push_back(v);
    }
    return hist;
}

// The uniqueness map of the fixed-point argument: y = Phi(x) integrates
//   dy/dt = (-D^2 v(t, x(t)))^{-1} grad_x R(x(t), I(t)),  y(0) = x(0),
// with I from the constraint along the input path and v = V(I). Both the
// Hessian and the rate gradient are evaluated at the input path, as written.
inline TraitPath apply_Phi(const RateModel& model, const TraitPath& path,
                           const InitialData& init, const PhiConfig& cfg,
                           std::vector<GridField>* v_out = nullptr) {
    const ResourcePath ipath = path_to_resource(model, path, cfg.tol_root);
    const std::vector<GridField> v = solve_v(model, ipath, init, cfg);

    auto f = [&](size_t k) {
        const Mat negH = -hessian_at(v[k], path.x[k], cfg.hessian_window);
        return solve_spd(symmetrize(negH), model.rate_grad_x(path.x[k], ipath.I[k])).eval();
    };

    // y is anchored at the problem datum x0 (= the initial peak), not at the
    // input path's start; candidates off the anchor get pulled back.
    TraitPath y;
    y.delta = path.delta;
    y.x.resize(path.x.size());
    y.x[0] = init.m0;
    const double dt = path.dt();
    Vec fk = f(0);
    for (size_t k = 0; k + 1 < path.x.size(); ++k) {
        const Vec fk1 = f(k + 1);
        y.x[k + 1] = y.x[k] + 0.5 * dt * (fk + fk1);
        fk = fk1;
    }
    if (v_out) *v_out = v;
    return y;
}

struct PicardResult {
    TraitPath fixed;
    std::vector<double> distances; // ||x^{j+1} - x^j||_inf per iteration
    bool converged = false;
};

// Plain Picard iteration (no acceleration: the raw contraction factor is the
// diagnostic). Iterates must stay in the ball B(x0, ball_radius), mirroring
// the smallness requirement on delta.
inline PicardResult iterate_Phi(const RateModel& model, const TraitPath& x0_path,
                                const InitialData& init, const PhiConfig& cfg, int k_max,
                                double tol) {
    PicardResult res;
    TraitPath cur = x0_path;
    const Vec anchor = init.m0; // the ball is centered at the problem datum
    auto check_ball = [&](const TraitPath& p) {
        for (const auto& xk : p.x)
            if ((xk - anchor).cwiseAbs().maxCoeff() > cfg.ball_radius)
                throw ball_escape_error(
                    "iterate_Phi: iterate left the ball (delta too large for this radius)");
    };
    check_ball(cur);
    for (int j = 0; j < k_max; ++j) {
        TraitPath next = apply_Phi(model, cur, init, cfg);
        check_ball(next);
        const double d = path_distance(next, cur);
        res.distances.push_back(d);
        cur = std::move(next);
        if (d <= tol) {
            res.converged = true;
            break;
        }
    }
    res.fixed = std::move(cur);
    return res;
}

struct LipschitzProbeResult {
    double ratio = 0.0;   // ||V(I1)-V(I2)||_{W2inf} / (||I1-I2||_inf * delta)
    double w2_norm = 0.0;
    double denom = 0.0;
    double delta = 0.0;
};

inline LipschitzProbeResult lipschitz_probe(const RateModel& model, const ResourcePath& I1,
                                            const ResourcePath& I2, const InitialData& init,
                                            const PhiConfig& cfg) {
    if (I1.I.size() != I2.I.size() || I1.delta != I2.delta)
        throw std::invalid_argument("lipschitz_probe: paths must share the time grid");
    double dI = 0.0;
    for (size_t k = 0; k < I1.I.size(); ++k) dI = std::max(dI, std::abs(I1.I[k] - I2.I[k]));
    if (dI < 1e-14)
        throw std::invalid_argument("lipschitz_probe: identical resource paths");

    const std::vector<GridField> v1 = solve_v(model, I1, init, cfg);
    const std::vector<GridField> v2 = solve_v(model, I2, init, cfg);
    double norm = 0.0;
    for (size_t k = 0; k < v1.size(); ++k) {
        GridField r = v1[k];
        for (long q = 0; q < r.size(); ++q) r[q] -= v2[k][q];
        norm = std::max(norm, w2inf_norm(r, 2));
    }
    LipschitzProbeResult out;
    out.delta = I1.delta;
    out.w2_norm = norm;
    out.denom = dI * I1.delta;
    out.ratio = norm / out.denom;
    return out;
}

// Transport solve for r = V(I1) - V(I2) by backward characteristics
//   d gamma/dt = -grad v1(t, gamma) - grad v2(t, gamma),
// accumulating the source R(gamma, I1(t)) - R(gamma, I2(t)) from r(0,.) = 0
// (direct subtraction of the two HJ equations fixes this sign).
// Characteristics that exit the box continue on the linearly extrapolated
// gradient and are counted.
struct CharacteristicsResult {
    std::vector<GridField> r; // one field per path sample time
    long clipped = 0;
};

inline CharacteristicsResult solve_transport_characteristics(
    const RateModel& model, const std::vector<GridField>& v1, const std::vector<GridField>& v2,
    const ResourcePath& I1, const ResourcePath& I2, int level_stride = 1) {
    if (v1.size() != v2.size() || v1.size() != I1.I.size() || I1.I.size() != I2.I.size())
        throw std::invalid_argument("characteristics: mismatched histories");
    const int K = static_cast<int>(v1.size()) - 1;
    const double dt = I1.delta / K;

    CharacteristicsResult out;
    auto velocity = [&](int level, const Vec& pos, bool* clip) {
        bool c1 = false, c2 = false;
        const Vec g1 = gradient_at(v1[level], pos, true, &c1);
        const Vec g2 = gradient_at(v2[level], pos, true, &c2);
        if (clip) *clip = c1 || c2;
        return (-(g1 + g2)).eval();
    };
    auto source = [&](int level, const Vec& pos) {
        return model.rate(pos, I1.I[level]) - model.rate(pos, I2.I[level]);
    };

    for (int kout = 0; kout <= K; kout += level_stride) {
        GridField r = v1[kout]; // same grid; values overwritten
        r.t = dt * kout;
        for (long nq = 0; nq < r.size(); ++nq) {
            Vec gamma = r.node(nq);
            double acc = 0.0;
            double s_here = source(kout, gamma);
            for (int k = kout; k > 0; --k) {
                bool clip1 = false, clip2 = false;
                const Vec w1 = velocity(k, gamma, &clip1);
                const Vec gstar = gamma - dt * w1;
                const Vec w0 = velocity(k - 1, gstar, &clip2);
                gamma -= 0.5 * dt * (w1 + w0);
                if (clip1 || clip2) ++out.clipped;
                const double s_prev = source(k - 1, gamma);
                acc += 0.5 * dt * (s_here + s_prev);
                s_here = s_prev;
            }
            r[nq] = acc;
        }
        out.r.push_back(std::move(r));
        if (kout == K) break;
    }
    return out;
}

// Smooth random path in the sup-ball around x0 with x(0) = x0 (deterministic
// under a fixed seed). Fourier modes vanish at t = 0.
inline TraitPath random_path_in_ball(std::mt19937& rng, const Vec& x0, double delta,
                                     int n_samples, double radius) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int modes = 3;
    TraitPath p;
    p.delta = delta;
    p.x.assign(n_samples, x0);
    std::vector<std::vector<double>> amp(x0.size(), std::vector<double>(modes));
    double total = 0.0;
    for (int a = 0; a < x0.size(); ++a)
        for (int m = 0; m < modes; ++m) {
            amp[a][m] = unif(rng);
            total = std::max(total, std::abs(amp[a][m]));
        }
    const double scale = 0.9 * radius / (modes * std::max(total, 1e-12));
    for (int k = 0; k < n_samples; ++k) {
        const double s = static_cast<double>(k) / (n_samples - 1);
        for (int a = 0; a < x0.size(); ++a) {
            double dx = 0.0;
            for (int m = 0; m < modes; ++m)
                dx += amp[a][m] * std::sin(0.5 * std::numbers::pi * (m + 1) * s);
            p.x[k][a] = x0[a] + scale * dx;
        }
    }
    return p;
}

struct ContractionStats {
    std::vector<double> factors; // ||Phi p - Phi q|| / ||p - q|| per pair
    double max_factor = 0.0;
    double median_factor = 0.0;
};

inline ContractionStats measure_contraction(const RateModel& model, const InitialData& init,
                                            const PhiConfig& cfg, const Vec& x0, double delta,
                                            int n_samples, int n_pairs, unsigned seed) {
    std::mt19937 rng(seed);
    ContractionStats st;
    for (int p = 0; p < n_pairs; ++p) {
        const TraitPath a = random_path_in_ball(rng, x0, delta, n_samples, cfg.ball_radius);
        const TraitPath b = random_path_in_ball(rng, x0, delta, n_samples, cfg.ball_radius);
        const double d = path_distance(a, b);
        if (d < 1e-10) continue;
        const TraitPath fa = apply_Phi(model, a, init, cfg);
        const TraitPath fb = apply_Phi(model, b, init, cfg);
        st.factors.push_back(path_distance(fa, fb) / d);
    }
    if (!st.factors.empty()) {
        std::vector<double> sorted = st.factors;
        std::sort(sorted.begin(), sorted.end());
        st.max_factor = sorted.back();
        st.median_factor = sorted[sorted.size() / 2];
    }
    return st;
}

} // namespace hjcon

#endif // HJCON_FIXED_POINT_HPP
