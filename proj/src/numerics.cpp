#include "geoprobe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "geoprobe/error.hpp"

namespace geoprobe {

CenteredDesign center(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, bool unit_variance) {
    if (X.rows() < 2) throw Error(ErrorKind::insufficient_data, "centering needs n >= 2 rows");
    if (X.rows() != Y.rows()) {
        throw Error(ErrorKind::dimension, "X has " + std::to_string(X.rows()) + " rows, Y has " +
                                              std::to_string(Y.rows()));
    }
    CenteredDesign c;
    c.x_mean = X.colwise().mean().transpose();
    c.y_mean = Y.colwise().mean().transpose();
    c.x = X.rowwise() - c.x_mean.transpose();
    c.y = Y.rowwise() - c.y_mean.transpose();
    c.x_scale = Eigen::VectorXd::Ones(X.cols());
    if (unit_variance) {
        const double denom = static_cast<double>(X.rows() - 1);
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double sd = std::sqrt(c.x.col(j).squaredNorm() / denom);
            if (sd > 0.0) {
                c.x_scale(j) = sd;
                c.x.col(j) /= sd;
            }
        }
    }
    return c;
}

RidgeSolution ridge_solve(const CenteredDesign& design, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::invalid_argument, "alpha must be a finite nonnegative number");
    }
    const Eigen::MatrixXd& X = design.x;
    const Eigen::MatrixXd& Y = design.y;
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();

    Eigen::MatrixXd Wt;  // d x K in scaled units
    if (alpha > 0.0 && d > n) {
        Eigen::MatrixXd G = X * X.transpose();
        G.diagonal().array() += alpha;
        Eigen::LLT<Eigen::MatrixXd> llt(G);
        if (llt.info() != Eigen::Success) throw Error(ErrorKind::singular, "dual ridge system is not positive definite");
        Wt = X.transpose() * llt.solve(Y);
    } else {
        Eigen::MatrixXd A = X.transpose() * X;
        A.diagonal().array() += alpha;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        const double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
        if (llt.info() != Eigen::Success || rc < 1e-13) {
            throw Error(ErrorKind::singular,
                        "X'X + alpha*I is singular or numerically so (alpha=" + std::to_string(alpha) +
                            "); use alpha > 0");
        }
        Wt = llt.solve(X.transpose() * Y);
    }

    RidgeSolution sol;
    sol.W = Wt.transpose();
    for (Eigen::Index j = 0; j < d; ++j) sol.W.col(j) /= design.x_scale(j);
    sol.b = design.y_mean - sol.W * design.x_mean;
    return sol;
}

namespace {

// One-sided Jacobi on A (m x n, m >= n): A V = U diag(S).
void hestenes(Eigen::MatrixXd& A, Eigen::MatrixXd& V) {
    const Eigen::Index n = A.cols();
    V = Eigen::MatrixXd::Identity(n, n);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double alpha = A.col(p).squaredNorm();
                const double beta = A.col(q).squaredNorm();
                const double gamma = A.col(p).dot(A.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (auto* M : {&A, &V}) {
                    const Eigen::VectorXd cp = M->col(p);
                    M->col(p) = c * cp - s * M->col(q);
                    M->col(q) = s * cp + c * M->col(q);
                }
            }
        }
        if (!rotated) return;
    }
}

// Fill columns [filled, r) of Q with unit vectors orthogonal to the first `filled`.
void complete_basis(Eigen::MatrixXd& Q, Eigen::Index filled) {
    const Eigen::Index m = Q.rows();
    Eigen::Index col = filled;
    for (Eigen::Index e = 0; e < m && col < Q.cols(); ++e) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(m, e);
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < col; ++j) v -= Q.col(j).dot(v) * Q.col(j);
        }
        const double nv = v.norm();
        if (nv > 1e-8) Q.col(col++) = v / nv;
    }
}

SvdResult svd_tall(const Eigen::MatrixXd& M) {
    Eigen::MatrixXd A = M;
    Eigen::MatrixXd V;
    hestenes(A, V);
    const Eigen::Index r = A.cols();
    Eigen::VectorXd norms(r);
    for (Eigen::Index j = 0; j < r; ++j) norms(j) = A.col(j).norm();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });

    SvdResult out{Eigen::MatrixXd::Zero(M.rows(), r), Eigen::VectorXd::Zero(r), Eigen::MatrixXd::Zero(r, r)};
    const double tol = (norms.size() > 0 ? norms.maxCoeff() : 0.0) * static_cast<double>(std::max(M.rows(), M.cols())) *
                       std::numeric_limits<double>::epsilon();
    Eigen::Index nonzero = 0;
    for (Eigen::Index k = 0; k < r; ++k) {
        const Eigen::Index j = order[static_cast<std::size_t>(k)];
        out.V.col(k) = V.col(j);
        if (norms(j) > tol && norms(j) > 0.0) {
            out.S(k) = norms(j);
            out.U.col(k) = A.col(j) / norms(j);
            ++nonzero;
        }
    }
    complete_basis(out.U, nonzero);
    return out;
}

}  // namespace

SvdResult svd(const Eigen::MatrixXd& M) {
    if (!M.allFinite()) throw Error(ErrorKind::numeric, "SVD input contains non-finite entries");
    if (M.rows() >= M.cols()) return svd_tall(M);
    SvdResult t = svd_tall(M.transpose());
    return SvdResult{std::move(t.V), std::move(t.S), std::move(t.U)};
}

}  // namespace geoprobe
