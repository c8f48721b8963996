#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geoprobe {

// ||X~'Y~||_F^2 / (||X~'X~||_F ||Y~'Y~||_F) on column-centered inputs.
// nullopt when either side is constant.
std::optional<double> linear_cka(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

struct CkaMatrix {
    std::vector<std::string> models;
    Eigen::MatrixXd values;  // symmetric, unit diagonal; NaN marks undefined pairs
};

// Pairwise matrix over representations sharing the same sample ordering.
CkaMatrix cka_matrix(const std::vector<Eigen::MatrixXd>& representations, std::vector<std::string> names);

struct CkaPair {
    std::size_t i = 0;
    std::size_t j = 0;
    double cka = 0.0;
    double abs_delta_r2 = 0.0;
};

struct CkaGapAnalysis {
    std::vector<CkaPair> pairs;  // upper triangle, row-major
    std::optional<double> rho;
    std::optional<double> p;
};

// Spearman correlation between pairwise CKA and |R^2_i - R^2_j|.
CkaGapAnalysis cka_gap_analysis(const CkaMatrix& cka, const std::vector<double>& r2);

}  // namespace geoprobe
