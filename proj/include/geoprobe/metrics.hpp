#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geoprobe {

// Per-column coefficient of determination. A column whose observed values
// have zero variance yields std::nullopt (undefined) and a warning.
std::vector<std::optional<double>> r2_per_target(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat);

// Mean absolute error over all samples and targets jointly.
double mae(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat);

// Mean of the defined entries; nullopt when none is defined.
std::optional<double> uniform_mean(const std::vector<std::optional<double>>& values);

struct EvalReport {
    std::vector<std::optional<double>> r2_per_target;
    std::optional<double> r2_uniform_mean;
    double mae = 0.0;
    std::size_t n_test = 0;
    std::vector<std::string> target_names;
};

EvalReport evaluate(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat, std::vector<std::string> target_names = {});

}  // namespace geoprobe
