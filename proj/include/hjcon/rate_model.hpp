#ifndef HJCON_RATE_MODEL_HPP
#define HJCON_RATE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hjcon/errors.hpp"
#include "hjcon/box.hpp"
#include "hjcon/linalg.hpp"

namespace hjcon {

// Competition weight psi. Either a positive constant or a polynomial in the
// squared radius s = |x|^2 with nonnegative coefficients and coeffs[0] > 0,
// which keeps positivity checkable at load time.
struct PsiSpec {
    enum class Kind { Const, Poly };
    Kind kind = Kind::Const;
    double value = 1.0;
    std::vector<double> coeffs; // psi = sum_k coeffs[k] * (|x|^2)^k

    static PsiSpec constant(double v) {
        if (!(v > 0.0)) throw std::invalid_argument("psi: constant must be positive");
        PsiSpec p;
        p.kind = Kind::Const;
        p.value = v;
        return p;
    }
    static PsiSpec poly(std::vector<double> c) {
        if (c.empty() || !(c[0] > 0.0))
            throw std::invalid_argument("psi: poly needs coeffs[0] > 0");
        for (double ck : c)
            if (ck < 0.0 || !std::isfinite(ck))
                throw std::invalid_argument("psi: poly coefficients must be nonnegative finite");
        PsiSpec p;
        p.kind = Kind::Poly;
        p.coeffs = std::move(c);
        return p;
    }

    double eval(const Vec& x) const {
        if (kind == Kind::Const) return value;
        const double s = x.squaredNorm();
        double acc = 0.0, sk = 1.0;
        for (double ck : coeffs) {
            acc += ck * sk;
            sk *= s;
        }
        return acc;
    }
};

// Reproduction rate family
//     R(x, I) = a - (1 + kappa I) (x - theta)' B (x - theta) - c I
// with B symmetric positive definite and kappa >= 0. kappa = 0 is the
// canonical family (exactly quadratic in x, linear in I, K3 = 0); kappa > 0
// adds an I-dependent curvature so the mixed-derivative bound K3 is exercised.
class RateModel {
  public:
    RateModel(double a, Mat B, Vec theta, double c, PsiSpec psi = PsiSpec{},
              double kappa = 0.0)
        : a_(a), c_(c), kappa_(kappa), B_(std::move(B)), theta_(std::move(theta)),
          psi_(std::move(psi)) {
        if (!std::isfinite(a_) || !std::isfinite(c_) || !std::isfinite(kappa_))
            throw std::invalid_argument("RateModel: non-finite parameter");
        if (B_.rows() != B_.cols() || B_.rows() != theta_.size())
            throw std::invalid_argument("RateModel: B/theta dimension mismatch");
        if (!is_symmetric(B_))
            throw std::invalid_argument("RateModel: B must be symmetric");
        if (kappa_ < 0.0)
            throw std::invalid_argument("RateModel: kappa must be >= 0");
    }

    int dim() const { return static_cast<int>(theta_.size()); }
    double a() const { return a_; }
    double c() const { return c_; }
    double kappa() const { return kappa_; }
    const Mat& B() const { return B_; }
    const Vec& theta() const { return theta_; }
    const PsiSpec& psi_spec() const { return psi_; }

    // Largest I with max_x R(x, I_M) = 0; the maximizer is theta.
    double I_max() const {
        return c_ > 0.0 ? a_ / c_ : std::numeric_limits<double>::infinity();
    }

    double quad_form(const Vec& x) const {
        const Vec y = x - theta_;
        return y.dot(B_ * y);
    }

    double rate(const Vec& x, double I) const {
        check_args(x, I);
        return a_ - (1.0 + kappa_ * I) * quad_form(x) - c_ * I;
    }

    Vec rate_grad_x(const Vec& x, double I) const {
        check_args(x, I);
        return -2.0 * (1.0 + kappa_ * I) * (B_ * (x - theta_));
    }

    Mat rate_hess_x(const Vec& x, double I) const {
        check_args(x, I);
        return -2.0 * (1.0 + kappa_ * I) * B_;
    }

    double rate_dI(const Vec& x, double I) const {
        check_args(x, I);
        return -kappa_ * quad_form(x) - c_;
    }

    double psi(const Vec& x) const {
        if (!x.allFinite()) throw std::invalid_argument("psi: non-finite x");
        return psi_.eval(x);
    }

    // Unique root I in (0, I_M] of R(x, I) = 0, by safeguarded Newton with a
    // bisection fallback on [0, I_M + margin]. Requires R(x, 0) > 0.
    double solve_I_for_zero(const Vec& x, double tol_root = 1e-12) const {
        check_args(x, 0.0);
        const double r0 = rate(x, 0.0);
        if (!(r0 > 0.0))
            throw no_positive_root_error("solve_I_for_zero: R(x,0) <= 0, no positive root");
        double lo = 0.0;
        double hi = I_max();
        if (!std::isfinite(hi))
            throw no_positive_root_error("solve_I_for_zero: c <= 0, R has no root in I");
        hi *= 1.0 + 1e-12; // margin against round-off at the maximizer
        double I = std::min(hi, std::max(lo, r0 / c_)); // exact for kappa = 0
        for (int it = 0; it < 100; ++it) {
            const double f = rate(x, I);
            if (std::abs(f) <= tol_root) return I;
            if (f > 0.0) lo = I; else hi = I;
            const double df = rate_dI(x, I); // <= -c < 0
            double step = f / df;
            double next = I - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            I = next;
        }
        if (std::abs(rate(x, I)) <= 10.0 * tol_root) return I;
        throw numerical_error("solve_I_for_zero: root iteration failed to converge");
    }

  private:
    void check_args(const Vec& x, double I) const {
        if (x.size() != theta_.size())
            throw std::invalid_argument("RateModel: x has wrong dimension");
        if (!x.allFinite() || !std::isfinite(I))
            throw std::invalid_argument("RateModel: non-finite input");
    }

    double a_, c_, kappa_;
    Mat B_;
    Vec theta_;
    PsiSpec psi_;
};

struct HypothesisEntry {
    std::string name;
    double value = 0.0;
    bool satisfied = false;
    Vec worst_x;   // empty when not applicable
    double worst_I = 0.0;
    std::string note;
};

struct HypothesisReport {
    std::vector<HypothesisEntry> entries;
    Box box;
    double I_lo = 0.0, I_hi = 0.0;

    // Derived constants (centered at theta; the maximizer normalization of
    // the hypothesis block is a coordinate translation).
    double K0_bar = 0.0;  // R(x,I) <= K0_bar - K1_bar |x-theta|^2
    double K1_bar = 0.0;  // smallest curvature: -2 K1_bar upper Hessian bound
    double K1_under = 0.0; // largest curvature: -2 K1_under lower Hessian bound
    double K2_bar = 0.0;  // dR/dI <= -K2_bar
    double K2_under = 0.0; // dR/dI >= -K2_under
    double K3 = 0.0;      // mixed I-x derivative bound (0 for kappa = 0)
    double I_M = 0.0;
    double psi_min = 0.0;

    bool admissible() const {
        for (const auto& e : entries)
            if (!e.satisfied) return false;
        return true;
    }
    const HypothesisEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

namespace detail {

inline void probe_nodes(const Box& box, int per_axis, std::vector<Vec>& out) {
    const int d = box.dim();
    out.clear();
    if (d == 1) {
        for (int i = 0; i < per_axis; ++i) {
            Vec x(1);
            x[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / double(per_axis - 1);
            out.push_back(x);
        }
    } else if (d == 2) {
        for (int i = 0; i < per_axis; ++i)
            for (int j = 0; j < per_axis; ++j) {
                Vec x(2);
                x[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / double(per_axis - 1);
                x[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / double(per_axis - 1);
                out.push_back(x);
            }
    } else {
        throw std::invalid_argument("probe_nodes: only d in {1,2} boxes supported");
    }
}

} // namespace detail

// Materializes the hypothesis block as a checkable report: Hessian sandwich,
// dI bounds, maximizer normalization, quadratic sandwich, psi positivity and
// the mixed-derivative constant K3. Third x-derivative boundedness is
// automatic for polynomial families and is reported, not probed.
inline HypothesisReport validate_hypotheses(const RateModel& model, const Box& box,
                                            double I_lo = 0.0, double I_hi = -1.0,
                                            int per_axis = 41, int I_samples = 21) {
    if (box.dim() != model.dim())
        throw std::invalid_argument("validate_hypotheses: box dimension mismatch");
    for (int a = 0; a < box.dim(); ++a)
        if (!(box.hi[a] > box.lo[a]))
            throw std::invalid_argument("validate_hypotheses: empty box");

    HypothesisReport rep;
    rep.box = box;

    const double IM = model.I_max();
    const bool c_pos = model.c() > 0.0 && std::isfinite(IM);
    if (I_hi < I_lo) I_hi = c_pos ? IM : 1.0;
    rep.I_lo = I_lo;
    rep.I_hi = I_hi;
    rep.I_M = c_pos ? IM : std::numeric_limits<double>::quiet_NaN();

    const double tol = 1e-9;
    std::vector<Vec> nodes;
    detail::probe_nodes(box, per_axis, nodes);
    std::vector<double> Is(I_samples);
    for (int k = 0; k < I_samples; ++k)
        Is[k] = I_lo + (I_hi - I_lo) * k / double(I_samples - 1);

    // Curvature constants from the family: D^2 R = -2 (1 + kappa I) B.
    const EigRange eigB = sym_eig_range(model.B());
    rep.K1_bar = eigB.min;
    rep.K1_under = (1.0 + model.kappa() * std::max(0.0, c_pos ? IM : I_hi)) *
                   std::max(eigB.max, 0.0);
    rep.K0_bar = model.a();
    rep.K2_bar = model.c();

    double Qmax = 0.0, psi_min = std::numeric_limits<double>::infinity();
    Vec psi_worst;
    for (const auto& x : nodes) {
        Qmax = std::max(Qmax, model.quad_form(x));
        const double p = model.psi(x);
        if (p < psi_min) {
            psi_min = p;
            psi_worst = x;
        }
    }
    rep.K2_under = model.c() + model.kappa() * Qmax;
    rep.psi_min = psi_min;

    // K3 = sup |d2R/dIdx_i| + |d3R/dIdx_i dx_j| over the box.
    {
        double k3 = 0.0;
        const double bmax = model.B().cwiseAbs().maxCoeff();
        for (const auto& x : nodes) {
            const Vec g = model.B() * (x - model.theta());
            k3 = std::max(k3, 2.0 * model.kappa() * (g.cwiseAbs().maxCoeff() + bmax));
        }
        rep.K3 = model.kappa() == 0.0 ? 0.0 : k3;
    }

    // 1. strict concavity: eigenvalues of D^2 R inside [-2 K1_under, -2 K1_bar], K1_bar > 0
    {
        HypothesisEntry e;
        e.name = "concavity";
        e.value = rep.K1_bar;
        e.satisfied = rep.K1_bar > 0.0;
        double worst = 0.0;
        for (const auto& x : nodes)
            for (double I : Is) {
                const EigRange r = sym_eig_range(model.rate_hess_x(x, I));
                const double viol = std::max(r.max - (-2.0 * rep.K1_bar + tol),
                                             (-2.0 * rep.K1_under - tol) - r.min);
                if (viol > worst) {
                    worst = viol;
                    e.worst_x = x;
                    e.worst_I = I;
                }
                if (viol > 0.0) e.satisfied = false;
            }
        e.note = "eig(D2R) in [-2*K1_under, -2*K1_bar], K1_bar > 0";
        rep.entries.push_back(e);
    }

    // 2. dI bounds: -K2_under <= dR/dI <= -K2_bar < 0
    {
        HypothesisEntry e;
        e.name = "dI_bounds";
        e.value = rep.K2_bar;
        e.satisfied = rep.K2_bar > 0.0;
        double worst = 0.0;
        for (const auto& x : nodes)
            for (double I : Is) {
                const double dI = model.rate_dI(x, I);
                const double viol = std::max(dI - (-rep.K2_bar + tol),
                                             (-rep.K2_under - tol) - dI);
                if (viol > worst) {
                    worst = viol;
                    e.worst_x = x;
                    e.worst_I = I;
                }
                if (viol > 0.0) e.satisfied = false;
            }
        e.note = "dR/dI in [-K2_under, -K2_bar], K2_bar > 0";
        rep.entries.push_back(e);
    }

    // 3. maximizer normalization: max_x R(x, I_M) = 0 attained at theta
    {
        HypothesisEntry e;
        e.name = "I_M_maximizer";
        e.value = rep.I_M;
        if (c_pos) {
            const double at_theta = model.rate(model.theta(), IM);
            bool ok = std::abs(at_theta) <= 1e-10;
            double worst = 0.0;
            for (const auto& x : nodes) {
                const double r = model.rate(x, IM);
                if (r > worst + tol) {
                    worst = r;
                    e.worst_x = x;
                    ok = false;
                }
            }
            e.satisfied = ok;
        } else {
            e.satisfied = false;
            e.note = "c <= 0: no finite I_M with max R(., I_M) = 0";
        }
        if (e.note.empty()) e.note = "max_x R(x, I_M) = 0 = R(theta, I_M)";
        rep.entries.push_back(e);
    }

    // 4. quadratic sandwich (centered at theta): -K1_under |y|^2 <= R <= K0_bar - K1_bar |y|^2
    {
        HypothesisEntry e;
        e.name = "quadratic_sandwich";
        e.value = rep.K0_bar;
        e.satisfied = true;
        double worst = 0.0;
        for (const auto& x : nodes) {
            const double y2 = (x - model.theta()).squaredNorm();
            for (double I : Is) {
                if (c_pos && I > IM) continue;
                const double R = model.rate(x, I);
                const double viol = std::max(R - (rep.K0_bar - rep.K1_bar * y2 + tol),
                                             (-rep.K1_under * y2 - tol) - R);
                if (viol > worst) {
                    worst = viol;
                    e.worst_x = x;
                    e.worst_I = I;
                }
                if (viol > 0.0) e.satisfied = false;
            }
        }
        e.note = "-K1_under|x-theta|^2 <= R <= K0_bar - K1_bar|x-theta|^2 on [0, I_M]";
        rep.entries.push_back(e);
    }

    // 5. psi positive on the box
    {
        HypothesisEntry e;
        e.name = "psi_positive";
        e.value = psi_min;
        e.satisfied = psi_min > 0.0;
        e.worst_x = psi_worst;
        e.note = "psi >= psi_min > 0 on the box";
        rep.entries.push_back(e);
    }

    // 6. K3 finite (always true for the polynomial family; value recorded)
    {
        HypothesisEntry e;
        e.name = "K3_bound";
        e.value = rep.K3;
        e.satisfied = std::isfinite(rep.K3);
        e.note = "|dIdx R| + |dIdxdx R| <= K3 on the box (0 for kappa = 0)";
        rep.entries.push_back(e);
    }

    // D^3 R boundedness is automatic for polynomials; recorded, not probed.
    {
        HypothesisEntry e;
        e.name = "D3R_bounded";
        e.value = 0.0;
        e.satisfied = true;
        e.note = "polynomial family: D3 R(., I) is constant in x; not probed";
        rep.entries.push_back(e);
    }

    return rep;
}

} // namespace hjcon

#endif // HJCON_RATE_MODEL_HPP
