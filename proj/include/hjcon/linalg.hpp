#ifndef HJCON_LINALG_HPP
#define HJCON_LINALG_HPP

#include <Eigen/Dense>
#include <cmath>

#include "hjcon/errors.hpp"

namespace hjcon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline bool is_symmetric(const Mat& M, double tol = 1e-12) {
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + M.cwiseAbs().maxCoeff());
}

struct EigRange {
    double min;
    double max;
};

inline EigRange sym_eig_range(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

inline bool is_spd(const Mat& M, double tol = 0.0) {
    if (!is_symmetric(M, 1e-10)) return false;
    return sym_eig_range(M).min > tol;
}

// Principal square root of a symmetric positive definite matrix.
inline Mat spd_sqrt(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw numerical_error("spd_sqrt: matrix is not positive definite");
    return es.operatorSqrt();
}

inline Vec solve_spd(const Mat& M, const Vec& b) {
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success)
        throw numerical_error("solve_spd: Cholesky factorization failed (matrix not SPD)");
    return llt.solve(b);
}

inline Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

} // namespace hjcon

#endif // HJCON_LINALG_HPP
