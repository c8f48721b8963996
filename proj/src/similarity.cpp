#include "geoprobe/similarity.hpp"

#include <cmath>
#include <limits>

#include "geoprobe/error.hpp"
#include "geoprobe/stats.hpp"

namespace geoprobe {

std::optional<double> linear_cka(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    if (X.rows() != Y.rows()) {
        throw Error(ErrorKind::dimension, "CKA inputs have " + std::to_string(X.rows()) + " and " +
                                              std::to_string(Y.rows()) + " rows");
    }
    if (X.rows() < 3) throw Error(ErrorKind::insufficient_data, "CKA needs n >= 3");
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd Yc = Y.rowwise() - Y.colwise().mean();
    const double xx = (Xc.transpose() * Xc).norm();
    const double yy = (Yc.transpose() * Yc).norm();
    if (xx == 0.0 || yy == 0.0) return std::nullopt;
    const double xy = (Xc.transpose() * Yc).squaredNorm();
    return xy / (xx * yy);
}

CkaMatrix cka_matrix(const std::vector<Eigen::MatrixXd>& reps, std::vector<std::string> names) {
    if (names.size() != reps.size()) throw Error(ErrorKind::dimension, "one name per representation required");
    const std::size_t M = reps.size();
    for (const auto& r : reps) {
        if (r.rows() != reps.front().rows()) throw Error(ErrorKind::alignment, "representations differ in sample count");
    }
    CkaMatrix out{std::move(names), Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M))};
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = i + 1; j < M; ++j) pairs.emplace_back(i, j);
    }
    const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
        const auto [i, j] = pairs[static_cast<std::size_t>(k)];
        const auto v = linear_cka(reps[i], reps[j]);
        const double val = v ? *v : std::numeric_limits<double>::quiet_NaN();
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = val;
        out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = val;
    }
    return out;
}

CkaGapAnalysis cka_gap_analysis(const CkaMatrix& cka, const std::vector<double>& r2) {
    const std::size_t M = r2.size();
    if (M < 3) throw Error(ErrorKind::insufficient_data, "CKA gap analysis needs at least 3 models");
    if (static_cast<std::size_t>(cka.values.rows()) != M || static_cast<std::size_t>(cka.values.cols()) != M) {
        throw Error(ErrorKind::dimension, "CKA matrix size does not match the R^2 vector");
    }
    CkaGapAnalysis out;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = i + 1; j < M; ++j) {
            const double c = cka.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (!std::isfinite(c)) throw Error(ErrorKind::numeric, "undefined CKA entry in gap analysis");
            out.pairs.push_back({i, j, c, std::abs(r2[i] - r2[j])});
            xs.push_back(c);
            ys.push_back(std::abs(r2[i] - r2[j]));
        }
    }
    const SpearmanResult s = spearman(xs, ys);
    out.rho = s.rho;
    out.p = s.p;
    return out;
}

}  // namespace geoprobe
