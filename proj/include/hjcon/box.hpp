#ifndef HJCON_BOX_HPP
#define HJCON_BOX_HPP

#include <stdexcept>

#include "hjcon/linalg.hpp"

namespace hjcon {

// Axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d], d in {1, 2} on grids.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size())
            throw std::invalid_argument("Box: lo/hi dimension mismatch");
        for (int a = 0; a < lo.size(); ++a)
            if (!(hi[a] > lo[a]))
                throw std::invalid_argument("Box: needs hi > lo on every axis");
    }
    static Box interval(double lo, double hi) {
        Vec l(1), h(1);
        l[0] = lo;
        h[0] = hi;
        return Box(l, h);
    }
    static Box rect(double lox, double hix, double loy, double hiy) {
        Vec l(2), h(2);
        l << lox, loy;
        h << hix, hiy;
        return Box(l, h);
    }

    int dim() const { return static_cast<int>(lo.size()); }
    double extent(int a) const { return hi[a] - lo[a]; }
    bool contains(const Vec& x, double tol = 0.0) const {
        for (int a = 0; a < dim(); ++a)
            if (x[a] < lo[a] - tol || x[a] > hi[a] + tol) return false;
        return true;
    }
};

} // namespace hjcon

#endif // HJCON_BOX_HPP
