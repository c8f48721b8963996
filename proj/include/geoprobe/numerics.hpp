#pragma once

#include <Eigen/Dense>

namespace geoprobe {

struct CenteredDesign {
    Eigen::MatrixXd x;       // n x d, centered (and scaled when unit_variance)
    Eigen::VectorXd x_mean;  // d
    Eigen::VectorXd x_scale; // d, all ones unless unit_variance
    Eigen::MatrixXd y;       // n x K, centered
    Eigen::VectorXd y_mean;  // K
};

// Columnwise mean subtraction. unit_variance additionally divides each
// feature column by its standard deviation (zero-variance columns keep scale 1).
CenteredDesign center(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, bool unit_variance = false);

struct RidgeSolution {
    Eigen::MatrixXd W;  // K x d, in the original (unscaled) feature units
    Eigen::VectorXd b;  // K
};

// W = ((X'X + alpha I)^-1 X'Y)' on the centered design, b = y_mean - W x_mean.
// Uses a Cholesky factorization of the d x d system, or of the n x n dual
// system when d > n and alpha > 0 (identical solution).
RidgeSolution ridge_solve(const CenteredDesign& design, double alpha);

struct SvdResult {
    Eigen::MatrixXd U;  // rows x r0
    Eigen::VectorXd S;  // r0, descending, nonnegative
    Eigen::MatrixXd V;  // cols x r0
};

// Thin SVD by one-sided (Hestenes) Jacobi rotations on the narrower side.
// r0 = min(rows, cols); U and V always have orthonormal columns.
SvdResult svd(const Eigen::MatrixXd& M);

}  // namespace geoprobe
