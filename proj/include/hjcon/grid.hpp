#ifndef HJCON_GRID_HPP
#define HJCON_GRID_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "hjcon/box.hpp"
#include "hjcon/errors.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/linalg.hpp"

namespace hjcon {

struct out_of_domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform tensor-grid sampling of a scalar field, d in {1, 2}.
// Flat storage is row-major: flat = i * n[1] + j (d = 2), flat = i (d = 1).
class GridField {
  public:
    GridField() = default;
    GridField(Box box, std::vector<int> n, double t_stamp = 0.0)
        : t(t_stamp), box_(std::move(box)), n_(std::move(n)) {
        if (static_cast<int>(n_.size()) != box_.dim())
            throw std::invalid_argument("GridField: n/box dimension mismatch");
        if (box_.dim() < 1 || box_.dim() > 2)
            throw std::invalid_argument("GridField: only d in {1,2}");
        long total = 1;
        for (int a = 0; a < dim(); ++a) {
            if (n_[a] < 5)
                throw std::invalid_argument("GridField: need at least 5 nodes per axis");
            total *= n_[a];
        }
        v_.assign(total, 0.0);
    }

    template <class Fn>
    static GridField sample(const Box& box, const std::vector<int>& n, Fn&& f,
                            double t_stamp = 0.0) {
        GridField g(box, n, t_stamp);
        for (long k = 0; k < g.size(); ++k) g.v_[k] = f(g.node(k));
        return g;
    }

    int dim() const { return box_.dim(); }
    long size() const { return static_cast<long>(v_.size()); }
    const Box& box() const { return box_; }
    const std::vector<int>& shape() const { return n_; }
    int n(int a) const { return n_[a]; }
    double h(int a) const { return box_.extent(a) / (n_[a] - 1); }

    double& operator[](long flat) { return v_[flat]; }
    double operator[](long flat) const { return v_[flat]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    long flat(int i, int j = 0) const { return dim() == 1 ? i : static_cast<long>(i) * n_[1] + j; }
    int idx0(long flat) const { return dim() == 1 ? static_cast<int>(flat) : static_cast<int>(flat / n_[1]); }
    int idx1(long flat) const { return dim() == 1 ? 0 : static_cast<int>(flat % n_[1]); }

    Vec node(long flat) const {
        Vec x(dim());
        if (dim() == 1) {
            x[0] = box_.lo[0] + h(0) * flat;
        } else {
            x[0] = box_.lo[0] + h(0) * idx0(flat);
            x[1] = box_.lo[1] + h(1) * idx1(flat);
        }
        return x;
    }

    bool on_boundary(long flat) const {
        const int i = idx0(flat);
        if (i == 0 || i == n_[0] - 1) return true;
        if (dim() == 2) {
            const int j = idx1(flat);
            if (j == 0 || j == n_[1] - 1) return true;
        }
        return false;
    }

    double t = 0.0;

  private:
    Box box_;
    std::vector<int> n_;
    std::vector<double> v_;
};

// ---------------------------------------------------------------------------
// nodal finite differences

inline Vec fd_gradient_node(const GridField& g, int i, int j = 0) {
    Vec grad(g.dim());
    grad[0] = (g[g.flat(i + 1, j)] - g[g.flat(i - 1, j)]) / (2.0 * g.h(0));
    if (g.dim() == 2)
        grad[1] = (g[g.flat(i, j + 1)] - g[g.flat(i, j - 1)]) / (2.0 * g.h(1));
    return grad;
}

inline Mat fd_hessian_node(const GridField& g, int i, int j = 0) {
    Mat H(g.dim(), g.dim());
    const double h0 = g.h(0);
    H(0, 0) = (g[g.flat(i + 1, j)] - 2.0 * g[g.flat(i, j)] + g[g.flat(i - 1, j)]) / (h0 * h0);
    if (g.dim() == 2) {
        const double h1 = g.h(1);
        H(1, 1) = (g[g.flat(i, j + 1)] - 2.0 * g[g.flat(i, j)] + g[g.flat(i, j - 1)]) / (h1 * h1);
        H(0, 1) = H(1, 0) =
            (g[g.flat(i + 1, j + 1)] + g[g.flat(i - 1, j - 1)] - g[g.flat(i + 1, j - 1)] -
             g[g.flat(i - 1, j + 1)]) /
            (4.0 * h0 * h1);
    }
    return H;
}

namespace detail {

// Cell of x along axis a, clamped so [i, i+1] is a valid interior-stencil
// pair. With allow_extrapolation the clamped fractional coordinate runs
// beyond [0,1], which extrapolates the interpolant linearly.
inline void locate(const GridField& g, const Vec& x, int margin, int* cell, double* frac,
                   bool allow_extrapolation = false) {
    for (int a = 0; a < g.dim(); ++a) {
        const double s = (x[a] - g.box().lo[a]) / g.h(a);
        int i = static_cast<int>(std::floor(s));
        double f = s - i;
        const int lo = margin;
        const int hi = g.n(a) - 2 - margin; // cell upper index i+1 <= n-1-margin
        if (!allow_extrapolation && (i < lo - 1 || i > hi + 1))
            throw out_of_domain_error("GridField: stencil outside domain");
        if (i < lo) { f += i - lo; i = lo; }
        if (i > hi) { f += i - hi; i = hi; }
        cell[a] = i;
        frac[a] = f;
    }
}

} // namespace detail

inline double value_at(const GridField& g, const Vec& x) {
    int c[2];
    double f[2];
    detail::locate(g, x, 0, c, f);
    if (g.dim() == 1)
        return (1.0 - f[0]) * g[g.flat(c[0])] + f[0] * g[g.flat(c[0] + 1)];
    const double v00 = g[g.flat(c[0], c[1])], v10 = g[g.flat(c[0] + 1, c[1])];
    const double v01 = g[g.flat(c[0], c[1] + 1)], v11 = g[g.flat(c[0] + 1, c[1] + 1)];
    return (1.0 - f[0]) * ((1.0 - f[1]) * v00 + f[1] * v01) +
           f[0] * ((1.0 - f[1]) * v10 + f[1] * v11);
}

// Multilinear interpolation of centered nodal gradients. With extrapolate,
// queries outside the box use the boundary cell's linear-in-gradient model
// (quadratic far-field); *clipped reports that this happened.
inline Vec gradient_at(const GridField& g, const Vec& x, bool extrapolate = false,
                       bool* clipped = nullptr) {
    if (clipped) *clipped = extrapolate && !g.box().contains(x);
    int c[2];
    double f[2];
    // margin 1: gradient stencils need one interior neighbor. Beyond the box
    // the interpolant continues linearly, which is exact for quadratic far
    // fields.
    detail::locate(g, x, 1, c, f, extrapolate);
    if (g.dim() == 1) {
        const Vec g0 = fd_gradient_node(g, c[0]);
        const Vec g1 = fd_gradient_node(g, c[0] + 1);
        return (1.0 - f[0]) * g0 + f[0] * g1;
    }
    const Vec g00 = fd_gradient_node(g, c[0], c[1]), g10 = fd_gradient_node(g, c[0] + 1, c[1]);
    const Vec g01 = fd_gradient_node(g, c[0], c[1] + 1),
              g11 = fd_gradient_node(g, c[0] + 1, c[1] + 1);
    return (1.0 - f[0]) * ((1.0 - f[1]) * g00 + f[1] * g01) +
           f[0] * ((1.0 - f[1]) * g10 + f[1] * g11);
}

namespace detail {

// Least-squares quadratic fit over the symmetric window [i-W, i+W] (physical
// offsets); returns the fitted second derivative. Exact on quadratics. Wide
// windows average out flux errors that are localized to a few cells (their
// second difference does not vanish with h), at O((Wh)^2) smooth-field cost.
inline double ls_curvature_1d(const GridField& g, int i, int W) {
    const int cnt = 2 * W + 1;
    double S2 = 0, S4 = 0, Su = 0, S2u = 0;
    for (int j = -W; j <= W; ++j) {
        const double s = j * g.h(0);
        const double u = g[i + j];
        S2 += s * s;
        S4 += s * s * s * s;
        Su += u;
        S2u += s * s * u;
    }
    const double det = cnt * S4 - S2 * S2;
    return 2.0 * (cnt * S2u - S2 * Su) / det;
}

inline Mat ls_hessian_2d(const GridField& g, int i, int j, int Wx, int Wy) {
    // basis {1, x, y, x^2, xy, y^2} on the window, normal equations
    Eigen::Matrix<double, 6, 6> N = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    for (int a = -Wx; a <= Wx; ++a)
        for (int c = -Wy; c <= Wy; ++c) {
            const double sx = a * g.h(0), sy = c * g.h(1);
            Eigen::Matrix<double, 6, 1> phi;
            phi << 1.0, sx, sy, sx * sx, sx * sy, sy * sy;
            N += phi * phi.transpose();
            b += phi * g[g.flat(i + a, j + c)];
        }
    const Eigen::Matrix<double, 6, 1> coef = N.ldlt().solve(b);
    Mat H(2, 2);
    H << 2.0 * coef[3], coef[4], coef[4], 2.0 * coef[5];
    return H;
}

} // namespace detail

// Discrete Hessian at x, interpolated between the surrounding nodes. With
// window = 1 these are plain centered second differences (O(h^2), exact on
// quadratics). window > 1 fits a quadratic over +-window nodes per axis,
// which is insensitive to cell-localized scheme errors near a peak; the
// window shrinks near the boundary and throws out-of-domain when no stencil
// fits. Needs x at least ~2h inside the box.
inline Mat hessian_at(const GridField& g, const Vec& x, int window = 1) {
    int c[2];
    double f[2];
    detail::locate(g, x, 1, c, f);
    if (g.dim() == 1) {
        const int W = std::min({window, c[0], g.n(0) - 2 - c[0]});
        if (W < 1) throw out_of_domain_error("hessian_at: stencil outside domain");
        Mat H0(1, 1), H1(1, 1);
        if (W == 1) {
            H0 = fd_hessian_node(g, c[0]);
            H1 = fd_hessian_node(g, c[0] + 1);
        } else {
            H0(0, 0) = detail::ls_curvature_1d(g, c[0], W);
            H1(0, 0) = detail::ls_curvature_1d(g, c[0] + 1, W);
        }
        return (1.0 - f[0]) * H0 + f[0] * H1;
    }
    const int Wx = std::min({window, c[0], g.n(0) - 2 - c[0]});
    const int Wy = std::min({window, c[1], g.n(1) - 2 - c[1]});
    if (Wx < 1 || Wy < 1) throw out_of_domain_error("hessian_at: stencil outside domain");
    auto corner = [&](int i, int j) {
        return (Wx == 1 && Wy == 1) ? fd_hessian_node(g, i, j)
                                    : detail::ls_hessian_2d(g, i, j, Wx, Wy);
    };
    const Mat H00 = corner(c[0], c[1]), H10 = corner(c[0] + 1, c[1]);
    const Mat H01 = corner(c[0], c[1] + 1), H11 = corner(c[0] + 1, c[1] + 1);
    Mat H = (1.0 - f[0]) * ((1.0 - f[1]) * H00 + f[1] * H01) +
            f[0] * ((1.0 - f[1]) * H10 + f[1] * H11);
    return symmetrize(H);
}

// ---------------------------------------------------------------------------
// peak location

struct PeakInfo {
    Vec x;        // refined sub-grid peak location
    double value; // refined peak value
    long node;    // flat index of the grid maximum
};

// Grid maximum (lexicographically smallest index wins ties) refined by one
// Newton step on the local quadratic model from the 3^d-point stencil.
// Error vs the true peak is O(h^2) for smooth strictly concave fields.
inline PeakInfo argmax_refined(const GridField& g) {
    long best = 0;
    for (long k = 1; k < g.size(); ++k)
        if (g[k] > g[best]) best = k;
    if (g.on_boundary(best))
        throw peak_escaped_error("argmax: maximum attained on the boundary (domain too small)");

    const int i = g.idx0(best), j = g.idx1(best);
    const Vec grad = fd_gradient_node(g, i, j);
    const Mat H = fd_hessian_node(g, i, j);
    Mat negH = -H;
    if (sym_eig_range(symmetrize(negH)).min <= 0.0)
        throw numerical_error("argmax: field not strictly concave at the grid maximum");
    Vec delta = solve_spd(symmetrize(negH), grad);
    for (int a = 0; a < g.dim(); ++a)
        delta[a] = std::clamp(delta[a], -g.h(a), g.h(a));
    PeakInfo p;
    p.node = best;
    p.x = g.node(best) + delta;
    p.value = g[best] + grad.dot(delta) - 0.5 * delta.dot(symmetrize(negH) * delta);
    return p;
}

// ---------------------------------------------------------------------------
// quadrature

namespace detail {

// Composite Simpson weights on a uniform 1-d grid; falls back to Simpson 3/8
// on the last three intervals when the interval count is odd. O(h^4).
inline std::vector<double> simpson_weights(int n, double h) {
    std::vector<double> w(n, 0.0);
    const int intervals = n - 1;
    int m = intervals;
    if (intervals % 2 != 0) m = intervals - 3; // leave a 3/8 tail
    for (int k = 0; k + 2 <= m; k += 2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if (m != intervals) {
        const int s = m;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    return w;
}

} // namespace detail

// integral of f over the box, f given nodally, composite Simpson per axis.
inline double integrate(const GridField& g) {
    const auto w0 = detail::simpson_weights(g.n(0), g.h(0));
    if (g.dim() == 1) {
        double acc = 0.0;
        for (int i = 0; i < g.n(0); ++i) acc += w0[i] * g[i];
        return acc;
    }
    const auto w1 = detail::simpson_weights(g.n(1), g.h(1));
    double acc = 0.0;
    for (int i = 0; i < g.n(0); ++i) {
        double row = 0.0;
        for (int j = 0; j < g.n(1); ++j) row += w1[j] * g[g.flat(i, j)];
        acc += w0[i] * row;
    }
    return acc;
}

// integral of weight(x) * field(x); weight evaluated analytically per node.
template <class Fn>
inline double integrate_weighted(const GridField& g, Fn&& weight) {
    const auto w0 = detail::simpson_weights(g.n(0), g.h(0));
    if (g.dim() == 1) {
        double acc = 0.0;
        Vec x(1);
        for (int i = 0; i < g.n(0); ++i) {
            x[0] = g.box().lo[0] + g.h(0) * i;
            acc += w0[i] * weight(x) * g[i];
        }
        return acc;
    }
    const auto w1 = detail::simpson_weights(g.n(1), g.h(1));
    double acc = 0.0;
    for (int i = 0; i < g.n(0); ++i) {
        double row = 0.0;
        for (int j = 0; j < g.n(1); ++j) row += w1[j] * weight(g.node(g.flat(i, j))) * g[g.flat(i, j)];
        acc += w0[i] * row;
    }
    return acc;
}

// Trapezoid mass (the functional conserved exactly by the finite-volume
// diffusion stencil with reflecting boundaries).
inline double trapezoid_mass(const GridField& g) {
    auto w = [&](int idx, int a) { return (idx == 0 || idx == g.n(a) - 1) ? 0.5 * g.h(a) : g.h(a); };
    if (g.dim() == 1) {
        double acc = 0.0;
        for (int i = 0; i < g.n(0); ++i) acc += w(i, 0) * g[i];
        return acc;
    }
    double acc = 0.0;
    for (int i = 0; i < g.n(0); ++i)
        for (int j = 0; j < g.n(1); ++j) acc += w(i, 0) * w(j, 1) * g[g.flat(i, j)];
    return acc;
}

// ---------------------------------------------------------------------------
// diagnostics

// Axis-aligned second differences over the interior (margin nodes excluded),
// skipping nodes whose value is below `skip_below` (non-representable region
// of a density-derived field).
struct SecondDiffRange {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    long checked = 0;
};

// max_cell_jump: triples whose neighbor difference exceeds it are skipped.
// For u = eps log n fields it bounds the per-cell density ratio, restricting
// the curvature diagnostic to where the density form resolves its own tail.
inline SecondDiffRange second_diff_range(const GridField& g, int margin = 2,
                                         double skip_below = -std::numeric_limits<double>::infinity(),
                                         double max_cell_jump = std::numeric_limits<double>::infinity()) {
    SecondDiffRange r;
    const int m = std::max(1, margin);
    auto consider = [&](double vm, double v0, double vp, double h2) {
        if (vm < skip_below || v0 < skip_below || vp < skip_below) return;
        if (std::abs(v0 - vm) > max_cell_jump || std::abs(vp - v0) > max_cell_jump) return;
        const double dd = (vp - 2.0 * v0 + vm) / h2;
        r.min = std::min(r.min, dd);
        r.max = std::max(r.max, dd);
        ++r.checked;
    };
    if (g.dim() == 1) {
        const double h2 = g.h(0) * g.h(0);
        for (int i = m; i < g.n(0) - m; ++i) consider(g[i - 1], g[i], g[i + 1], h2);
        return r;
    }
    const double h02 = g.h(0) * g.h(0), h12 = g.h(1) * g.h(1);
    for (int i = m; i < g.n(0) - m; ++i)
        for (int j = m; j < g.n(1) - m; ++j) {
            consider(g[g.flat(i - 1, j)], g[g.flat(i, j)], g[g.flat(i + 1, j)], h02);
            consider(g[g.flat(i, j - 1)], g[g.flat(i, j)], g[g.flat(i, j + 1)], h12);
        }
    return r;
}

// One-time-level sandwich check of a (prefactor-removed) u field against the
// envelope at time t. tol_* absorb discretization error of the checked field.
inline SandwichDiagnostics check_sandwich(const GridField& u, const SandwichEnvelope& env,
                                          double t, double tol_value, double tol_hess,
                                          int margin = 2,
                                          double skip_below = -std::numeric_limits<double>::infinity(),
                                          double max_cell_jump = std::numeric_limits<double>::infinity()) {
    SandwichDiagnostics d;
    for (long k = 0; k < u.size(); ++k) {
        const double val = u[k];
        if (val < skip_below) continue;
        const double y2 = (u.node(k) - env.center).squaredNorm();
        const double m_up = env.value_upper(t, y2) - val;
        const double m_lo = val - env.value_lower(t, y2);
        d.min_value_margin_up = std::min(d.min_value_margin_up, m_up);
        d.min_value_margin_lo = std::min(d.min_value_margin_lo, m_lo);
        if (m_up < -tol_value || m_lo < -tol_value) d.value_ok = false;
        ++d.nodes_checked;
    }
    const SecondDiffRange r = second_diff_range(u, margin, skip_below, max_cell_jump);
    if (r.checked > 0) {
        const double m_up = env.hess_upper(t) - r.max;
        const double m_tight = r.min - env.hess_lower(t, 1.0);
        const double m_loose = r.min - env.hess_lower(t, 2.0);
        d.min_hess_margin_up = m_up;
        d.min_hess_margin_lo_tight = m_tight;
        d.min_hess_margin_lo_loose = m_loose;
        if (m_up < -tol_hess) d.hess_upper_ok = false;
        if (m_tight < -tol_hess) d.hess_lower_ok_tight = false;
        if (m_loose < -tol_hess) d.hess_lower_ok_loose = false;
    }
    return d;
}

// Discrete W^{2,inf} norm: sup over interior nodes (boundary layer of width
// margin*h excluded) and of |r|, |grad r|, |D^2 r| entries.
inline double w2inf_norm(const GridField& g, int margin = 2) {
    double norm = 0.0;
    const int m = std::max(1, margin);
    if (g.dim() == 1) {
        for (int i = m; i < g.n(0) - m; ++i) {
            norm = std::max(norm, std::abs(g[i]));
            norm = std::max(norm, std::abs(fd_gradient_node(g, i)[0]));
            norm = std::max(norm, std::abs(fd_hessian_node(g, i)(0, 0)));
        }
        return norm;
    }
    for (int i = m; i < g.n(0) - m; ++i)
        for (int j = m; j < g.n(1) - m; ++j) {
            norm = std::max(norm, std::abs(g[g.flat(i, j)]));
            const Vec gr = fd_gradient_node(g, i, j);
            norm = std::max({norm, std::abs(gr[0]), std::abs(gr[1])});
            const Mat H = fd_hessian_node(g, i, j);
            norm = std::max({norm, std::abs(H(0, 0)), std::abs(H(1, 1)), std::abs(H(0, 1))});
        }
    return norm;
}

inline double max_abs(const GridField& g) {
    double m = 0.0;
    for (long k = 0; k < g.size(); ++k) m = std::max(m, std::abs(g[k]));
    return m;
}

// max over nodes of sum_a |centered difference along a| (CFL estimate).
inline double max_grad_l1(const GridField& g) {
    double m = 0.0;
    if (g.dim() == 1) {
        for (int i = 1; i < g.n(0) - 1; ++i)
            m = std::max(m, std::abs(g[i + 1] - g[i - 1]) / (2.0 * g.h(0)));
        return m;
    }
    for (int i = 1; i < g.n(0) - 1; ++i)
        for (int j = 1; j < g.n(1) - 1; ++j) {
            const double gx = std::abs(g[g.flat(i + 1, j)] - g[g.flat(i - 1, j)]) / (2.0 * g.h(0));
            const double gy = std::abs(g[g.flat(i, j + 1)] - g[g.flat(i, j - 1)]) / (2.0 * g.h(1));
            m = std::max(m, gx + gy);
        }
    return m;
}

// ---------------------------------------------------------------------------
// flat binary snapshots: i64 d | i64 n[d] | f64 lo[d] | f64 hi[d] | f64 t |
// f64 values (row-major), all little-endian.

inline void write_snapshot(const std::string& path, const GridField& g) {
    static_assert(std::endian::native == std::endian::little,
                  "snapshot format is little-endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_snapshot: cannot open " + path);
    auto put_i64 = [&](std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    put_i64(g.dim());
    for (int a = 0; a < g.dim(); ++a) put_i64(g.n(a));
    for (int a = 0; a < g.dim(); ++a) put_f64(g.box().lo[a]);
    for (int a = 0; a < g.dim(); ++a) put_f64(g.box().hi[a]);
    put_f64(g.t);
    out.write(reinterpret_cast<const char*>(g.values().data()),
              static_cast<std::streamsize>(g.size() * 8));
    if (!out) throw std::runtime_error("write_snapshot: write failed for " + path);
}

inline GridField read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_snapshot: cannot open " + path);
    auto get_i64 = [&]() { std::int64_t v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
    auto get_f64 = [&]() { double v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
    const int d = static_cast<int>(get_i64());
    if (d < 1 || d > 2) throw std::runtime_error("read_snapshot: bad dimension");
    std::vector<int> n(d);
    for (int a = 0; a < d; ++a) n[a] = static_cast<int>(get_i64());
    Vec lo(d), hi(d);
    for (int a = 0; a < d; ++a) lo[a] = get_f64();
    for (int a = 0; a < d; ++a) hi[a] = get_f64();
    const double t = get_f64();
    GridField g(Box(lo, hi), n, t);
    in.read(reinterpret_cast<char*>(g.values().data()), static_cast<std::streamsize>(g.size() * 8));
    if (!in) throw std::runtime_error("read_snapshot: truncated file " + path);
    return g;
}


// InitialData from a tabulated strictly concave field: the peak and local
// curvature come from the refined argmax, the sandwich constants from the
// discrete value/second-difference bounds, and u0 evaluates by interpolation
// (solver boxes must sit inside the tabulated box). The field's maximum must
// be 0 to admissible tolerance.
inline InitialData make_initial_data_from_field(const RateModel& model, GridField field,
                                                double r_explicit = -1.0) {
    if (field.dim() != model.dim())
        throw std::invalid_argument("make_initial_data_from_field: dimension mismatch");
    const PeakInfo peak = argmax_refined(field);
    const Mat A0 = symmetrize(-0.5 * hessian_at(field, peak.x, 2));
    if (!is_spd(A0))
        throw std::invalid_argument("make_initial_data_from_field: field not strictly concave at the peak");

    const SecondDiffRange dd = second_diff_range(field, 1);
    if (!(dd.max < 0.0))
        throw std::invalid_argument("make_initial_data_from_field: field not discretely concave");

    InitialData init;
    init.m0 = peak.x;
    init.A0 = A0;
    init.offset = peak.value;
    init.I0 = model.solve_I_for_zero(init.m0);

    const int d = model.dim();
    const double gauss =
        model.psi(init.m0) * std::pow(std::numbers::pi, 0.5 * d) / std::sqrt(A0.determinant());
    init.r = r_explicit > 0.0 ? r_explicit : init.I0 / gauss;

    // discrete sandwich constants, centered at theta
    init.L1_up = -0.5 * dd.max;
    init.L1_lo = -0.5 * dd.min;
    double up0 = 0.0, lo0 = 0.0;
    for (long k = 0; k < field.size(); ++k) {
        const double y2 = (field.node(k) - model.theta()).squaredNorm();
        up0 = std::max(up0, field[k] + init.L1_up * y2);
        lo0 = std::max(lo0, -field[k] - init.L1_lo * y2);
    }
    init.L0_up = up0;
    init.L0_lo = lo0;

    auto holder = std::make_shared<GridField>(std::move(field));
    init.tab = [holder](const Vec& x) { return value_at(*holder, x); };
    return init;
}

} // namespace hjcon

#endif // HJCON_GRID_HPP
