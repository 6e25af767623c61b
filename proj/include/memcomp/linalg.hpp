#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "memcomp/core.hpp"

namespace memcomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kMaxDimension = 16;
inline constexpr double kPivotTolerance = 1e-10;

inline bool is_symmetric(const Matrix& a, double tol = 1e-9) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Smallest eigenvalue of the symmetric part of `a`.
inline double min_eigenvalue(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Matrix& a, double tol = 1e-10) {
    const double scale = a.size() == 0 ? 1.0 : std::max(1.0, a.cwiseAbs().maxCoeff());
    return is_symmetric(a) && min_eigenvalue(a) >= -tol * scale;
}

/// log2 |a| for a symmetric positive definite matrix via LDL^T. Every pivot of D
/// must exceed kPivotTolerance, otherwise ModelAssumptionError.
inline double log2_det_spd(const Matrix& a) {
    if (a.rows() != a.cols()) throw ArgumentError("log-det of a non-square matrix");
    if (a.rows() > kMaxDimension) throw ArgumentError("log-det supports d <= 16");
    if (a.rows() == 0) return 0.0;
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw ModelAssumptionError("LDL^T factorization failed");
    const Vector diag = ldlt.vectorD();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > kPivotTolerance))
            throw ModelAssumptionError("matrix is not positive definite (pivot " +
                                       std::to_string(diag[i]) + ")");
        acc += std::log2(diag[i]);
    }
    return acc;
}

/// Symmetric square root factor R with R R^T = a for a PSD matrix (eigen route,
/// so singular covariances are allowed).
inline Matrix psd_sqrt(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace memcomp
