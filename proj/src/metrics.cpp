#include "geoprobe/metrics.hpp"

#include <cmath>
#include <limits>

#include "geoprobe/error.hpp"
#include "geoprobe/log.hpp"

namespace geoprobe {

namespace {

void check_shapes(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat) {
    if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols()) {
        throw Error(ErrorKind::dimension, "Y is " + std::to_string(Y.rows()) + "x" + std::to_string(Y.cols()) +
                                              ", predictions are " + std::to_string(Yhat.rows()) + "x" +
                                              std::to_string(Yhat.cols()));
    }
}

}  // namespace

std::vector<std::optional<double>> r2_per_target(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat) {
    check_shapes(Y, Yhat);
    if (Y.rows() < 2) throw Error(ErrorKind::insufficient_data, "R^2 needs at least 2 samples");
    std::vector<std::optional<double>> out(static_cast<std::size_t>(Y.cols()));
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        const double mean = Y.col(k).mean();
        const double ss_tot = (Y.col(k).array() - mean).square().sum();
        const double ss_res = (Y.col(k) - Yhat.col(k)).squaredNorm();
        const double floor = 16.0 * static_cast<double>(Y.rows()) *
                             std::pow(std::numeric_limits<double>::epsilon() * std::abs(mean), 2);
        if (ss_tot <= floor) {
            warn("target column " + std::to_string(k) + " has zero variance; R^2 undefined and excluded from the mean");
            continue;
        }
        out[static_cast<std::size_t>(k)] = 1.0 - ss_res / ss_tot;
    }
    return out;
}

double mae(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat) {
    check_shapes(Y, Yhat);
    if (Y.size() == 0) return 0.0;
    return (Y - Yhat).array().abs().sum() / static_cast<double>(Y.size());
}

std::optional<double> uniform_mean(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

EvalReport evaluate(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat, std::vector<std::string> target_names) {
    EvalReport r;
    r.r2_per_target = r2_per_target(Y, Yhat);
    r.r2_uniform_mean = uniform_mean(r.r2_per_target);
    r.mae = mae(Y, Yhat);
    r.n_test = static_cast<std::size_t>(Y.rows());
    r.target_names = std::move(target_names);
    return r;
}

}  // namespace geoprobe
