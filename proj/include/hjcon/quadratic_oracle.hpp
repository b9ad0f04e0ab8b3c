#ifndef HJCON_QUADRATIC_ORACLE_HPP
#define HJCON_QUADRATIC_ORACLE_HPP

#include <cmath>
#include <vector>

#include "hjcon/errors.hpp"
#include "hjcon/grid.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/linalg.hpp"
#include "hjcon/rate_model.hpp"
#include "hjcon/trajectory.hpp"

namespace hjcon {

// Exact reduction of the constrained problem for the canonical family and
// exactly quadratic initial data: with u(t,x) = -(x-m)' A (x-m), matching
// coefficients of (x-m) powers in  du/dt = |grad u|^2 + R(x, I)  gives
//   order 0:  I = (a - (m-theta)' B (m-theta)) / c      (constraint R(m,I)=0)
//   order 1:  dm/dt = -A^{-1} B (m - theta)
//   order 2:  dA/dt = B - 4 A^2
// The grid solvers are checked against this reduction.

struct AnsatzSample {
    double t = 0.0;
    Vec m;
    Mat A;
    double I = 0.0;
};

using AnsatzHistory = std::vector<AnsatzSample>;

inline void stationary_ansatz(const RateModel& model, Vec& m, Mat& A) {
    m = model.theta();
    A = 0.5 * spd_sqrt(model.B());
}

class QuadraticOracle {
  public:
    QuadraticOracle(const RateModel& model, const InitialData& init)
        : model_(model), init_(init) {
        if (model_.kappa() != 0.0)
            throw oracle_inapplicable_error(
                "quadratic oracle: needs the canonical family (kappa = 0)");
        if (init_.tabulated())
            throw oracle_inapplicable_error(
                "quadratic oracle: u0 is tabulated (not exactly quadratic)");
        if (!init_.is_centered_max_zero())
            throw oracle_inapplicable_error(
                "quadratic oracle: u0 must be exactly quadratic with max 0");
        if (!is_spd(init_.A0))
            throw oracle_inapplicable_error("quadratic oracle: A0 must be SPD");
    }

    const RateModel& model() const { return model_; }
    const InitialData& init() const { return init_; }

    double resource(const Vec& m) const {
        const double I = (model_.a() - model_.quad_form(m)) / model_.c();
        if (!(I > 0.0))
            throw no_positive_root_error("quadratic oracle: trait left the viable region");
        return I;
    }

    void rhs(const Vec& m, const Mat& A, Vec& dm, Mat& dA) const {
        dm = -solve_spd(A, model_.B() * (m - model_.theta()));
        dA = model_.B() - 4.0 * A * A;
    }

    // Classic fixed-step RK4 on (m, A); A re-symmetrized per step to kill
    // drift and checked SPD (losing definiteness signals a bug, not an
    // expected failure, for admissible data).
    AnsatzHistory integrate(double T, double dt, int store_every = 1) const {
        if (!(dt > 0.0) || !(T > 0.0))
            throw std::invalid_argument("integrate: need T > 0, dt > 0");
        const int n_steps = static_cast<int>(std::ceil(T / dt - 1e-12));
        const double dt_eff = T / n_steps;

        Vec m = init_.m0;
        Mat A = init_.A0;
        AnsatzHistory hist;
        hist.push_back({0.0, m, A, resource(m)});

        Vec k1m, k2m, k3m, k4m;
        Mat k1A, k2A, k3A, k4A;
        for (int s = 0; s < n_steps; ++s) {
            rhs(m, A, k1m, k1A);
            rhs(m + 0.5 * dt_eff * k1m, A + 0.5 * dt_eff * k1A, k2m, k2A);
            rhs(m + 0.5 * dt_eff * k2m, A + 0.5 * dt_eff * k2A, k3m, k3A);
            rhs(m + dt_eff * k3m, A + dt_eff * k3A, k4m, k4A);
            m += dt_eff / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
            A += dt_eff / 6.0 * (k1A + 2.0 * k2A + 2.0 * k3A + k4A);
            A = symmetrize(A);
            if (sym_eig_range(A).min <= 0.0)
                throw numerical_error("quadratic oracle: A lost positive definiteness");
            if ((s + 1) % store_every == 0 || s + 1 == n_steps)
                hist.push_back({dt_eff * (s + 1), m, A, resource(m)});
        }
        return hist;
    }

    // Adaptive Dormand-Prince 5(4) for reference trajectories.
    AnsatzHistory integrate_adaptive(double T, double tol = 1e-10) const {
        const int d = model_.dim();
        const int nv = d + d * d;
        auto pack = [&](const Vec& m, const Mat& A) {
            Vec y(nv);
            y.head(d) = m;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) y[d + i * d + j] = A(i, j);
            return y;
        };
        auto unpack = [&](const Vec& y, Vec& m, Mat& A) {
            m = y.head(d);
            A.resize(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) A(i, j) = y[d + i * d + j];
            A = symmetrize(A);
        };
        auto f = [&](const Vec& y) {
            Vec m, dm;
            Mat A, dA;
            unpack(y, m, A);
            rhs(m, A, dm, dA);
            return pack(dm, dA).eval();
        };

        // Dormand-Prince coefficients (autonomous system: stage times unused)
        static const double a21 = 1.0 / 5;
        static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
        static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        Vec y = pack(init_.m0, init_.A0);
        double t = 0.0, dt = std::min(1e-2, T);
        AnsatzHistory hist;
        {
            Vec m;
            Mat A;
            unpack(y, m, A);
            hist.push_back({0.0, m, A, resource(m)});
        }
        int guard = 0;
        while (t < T && ++guard < 1000000) {
            dt = std::min(dt, T - t);
            const Vec k1 = f(y);
            const Vec k2 = f(y + dt * (a21 * k1));
            const Vec k3 = f(y + dt * (a31 * k1 + a32 * k2));
            const Vec k4 = f(y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
            const Vec k5 = f(y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const Vec k6 = f(y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const Vec y5 = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Vec k7 = f(y5);
            const Vec err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double en = 0.0;
            for (int i = 0; i < err.size(); ++i)
                en = std::max(en, std::abs(err[i]) / (tol + tol * std::abs(y5[i])));
            if (en <= 1.0) {
                t += dt;
                y = y5;
                Vec m;
                Mat A;
                unpack(y, m, A);
                if (sym_eig_range(A).min <= 0.0)
                    throw numerical_error("quadratic oracle: A lost positive definiteness");
                hist.push_back({t, m, A, resource(m)});
            }
            const double fac = std::clamp(0.9 * std::pow(en > 0 ? en : 1e-10, -0.2), 0.2, 5.0);
            dt *= fac;
        }
        if (t < T) throw numerical_error("quadratic oracle: adaptive integration stalled");
        return hist;
    }

    // Trajectory record; the closed-form I is cross-checked against the
    // scalar root solve once per sample to tie the modules together.
    TrajectoryRecord to_trajectory(const AnsatzHistory& hist) const {
        TrajectoryRecord rec;
        rec.samples.reserve(hist.size());
        for (const auto& s : hist) {
            const double I_root = model_.solve_I_for_zero(s.m);
            if (std::abs(I_root - s.I) > 1e-9)
                throw numerical_error("quadratic oracle: closed-form I disagrees with root solve");
            TrajectorySample out;
            out.t = s.t;
            out.x = s.m;
            out.I = s.I;
            out.rho = s.I / model_.psi(s.m);
            out.max_u_residual = 0.0; // max u = u(m) = 0 by construction
            out.R_residual = std::abs(model_.rate(s.m, s.I));
            rec.samples.push_back(std::move(out));
        }
        return rec;
    }

  private:
    const RateModel& model_;
    InitialData init_;
};

// Max HJ residual |du/dt - |grad u|^2 - R(x, I)| of an ansatz history on a
// probe grid. Spatial terms are analytic; du/dt uses second-order central
// differencing of the history (needs >= 3 uniformly spaced levels).
inline double oracle_hj_residual(const RateModel& model, const AnsatzHistory& hist,
                                 const Box& box, const std::vector<int>& n) {
    if (hist.size() < 3)
        throw std::invalid_argument("oracle_hj_residual: need at least 3 time levels");
    const double dt = hist[1].t - hist[0].t;
    for (size_t k = 1; k + 1 < hist.size(); ++k)
        if (std::abs((hist[k + 1].t - hist[k].t) - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
            throw std::invalid_argument("oracle_hj_residual: history not uniformly spaced");

    GridField probe(box, n); // node coordinates only
    double worst = 0.0;
    for (size_t k = 1; k + 1 < hist.size(); ++k) {
        const auto& sm = hist[k - 1];
        const auto& s0 = hist[k];
        const auto& sp = hist[k + 1];
        for (long kk = 0; kk < probe.size(); ++kk) {
            const Vec x = probe.node(kk);
            auto uval = [&](const AnsatzSample& s) {
                const Vec z = x - s.m;
                return -z.dot(s.A * z);
            };
            const double dudt = (uval(sp) - uval(sm)) / (sp.t - sm.t);
            const Vec gradu = -2.0 * (s0.A * (x - s0.m));
            const double res = dudt - gradu.squaredNorm() - model.rate(x, s0.I);
            worst = std::max(worst, std::abs(res));
        }
    }
    return worst;
}

// Linear-in-time state query on a (possibly non-uniform) history.
inline AnsatzSample ansatz_at(const AnsatzHistory& hist, double t) {
    if (hist.empty()) throw std::invalid_argument("ansatz_at: empty history");
    if (t <= hist.front().t) return hist.front();
    if (t >= hist.back().t) return hist.back();
    size_t lo = 0, hi = hist.size() - 1;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        (hist[mid].t <= t ? lo : hi) = mid;
    }
    const double w = (t - hist[lo].t) / (hist[hi].t - hist[lo].t);
    AnsatzSample s;
    s.t = t;
    s.m = (1.0 - w) * hist[lo].m + w * hist[hi].m;
    s.A = (1.0 - w) * hist[lo].A + w * hist[hi].A;
    s.I = (1.0 - w) * hist[lo].I + w * hist[hi].I;
    return s;
}

// columns: t, m_1..m_d, A upper triangle (row-major), I, rho, constraint_residual
inline void write_oracle_csv(const std::string& path, const AnsatzHistory& hist,
                             const RateModel& model) {
    const int d = model.dim();
    std::vector<std::string> header{"t"};
    for (int a = 0; a < d; ++a) header.push_back("m_" + std::to_string(a + 1));
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            header.push_back("A_" + std::to_string(i + 1) + std::to_string(j + 1));
    header.insert(header.end(), {"I", "rho", "constraint_residual"});
    std::vector<std::vector<double>> rows;
    rows.reserve(hist.size());
    for (const auto& s : hist) {
        std::vector<double> row{s.t};
        for (int a = 0; a < d; ++a) row.push_back(s.m[a]);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) row.push_back(s.A(i, j));
        row.insert(row.end(), {s.I, s.I / model.psi(s.m), 0.0});
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

} // namespace hjcon

#endif // HJCON_QUADRATIC_ORACLE_HPP
