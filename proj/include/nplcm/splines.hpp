#pragma once

#include <span>
#include <vector>

#include "nplcm/common.hpp"

namespace nplcm {

// Cubic B-spline basis on equally spaced knots with zero-mean centering
// and the first-order difference penalty used by the P-spline priors.
struct SplineBasis {
    std::vector<double> knots;      // kappa_0 < ... < kappa_{M+1}
    int n_basis = 0;                // C = M + 4
    Matrix basis;                   // centered basis at the construction points
    std::vector<double> col_means;  // raw-basis column means, frozen at construction
    Matrix delta1;                  // (C-1) x C first-difference matrix
    Matrix penalty;                 // K = delta1' delta1

    // Raw (uncentered) cubic basis row at x; x outside the knot span is
    // clamped to the boundary.
    std::vector<double> raw_row(double x) const;

    // Centered basis row at x using the frozen column means.
    std::vector<double> centered_row(double x) const;
};

// Build a C-column cubic basis with M = C-4 equally spaced interior knots on
// [min(x), max(x)], columns centered to zero mean over x.
SplineBasis build_basis(std::span<const double> x, int df);

// Rebuild a basis from stored knots and centering constants (fit artifacts).
SplineBasis basis_from_knots(std::vector<double> knots, std::vector<double> col_means);

// First-difference matrix and penalty K = D'D for a C-coefficient spline.
std::pair<Matrix, Matrix> difference_penalty(int n_coef);

// Additive predictor: sum_j B_j beta_j + X_lin gamma per row. `bases` and
// `linear_columns` must pair up with consecutive blocks of `coefs`.
std::vector<double> evaluate_additive(const std::vector<const SplineBasis*>& bases,
                                      const std::vector<std::span<const double>>& linear_columns,
                                      std::span<const double> coefs);

}  // namespace nplcm
