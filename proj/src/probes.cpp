#include "geoprobe/probes.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geoprobe/arraystore.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/numerics.hpp"

namespace geoprobe {

Samples Samples::rows(std::span<const std::size_t> idx) const {
    Samples s{Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), X.cols()),
              Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), Y.cols())};
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = static_cast<Eigen::Index>(idx[r]);
        s.X.row(static_cast<Eigen::Index>(r)) = X.row(src);
        s.Y.row(static_cast<Eigen::Index>(r)) = Y.row(src);
    }
    return s;
}

LinearProbe fit_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha, const FitOptions& options) {
    const CenteredDesign design = center(X, Y, options.unit_variance);
    RidgeSolution sol = ridge_solve(design, alpha);
    LinearProbe p;
    p.W = std::move(sol.W);
    p.b = std::move(sol.b);
    p.rank = static_cast<int>(std::min(Y.cols(), X.cols()));
    p.alpha = alpha;
    p.x_mean = design.x_mean;
    p.y_mean = design.y_mean;
    return p;
}

LinearProbe rrr_truncate(const LinearProbe& probe, int r) {
    if (r < 1) throw Error(ErrorKind::invalid_argument, "truncation rank must be >= 1");
    const auto full = std::min(probe.W.rows(), probe.W.cols());
    if (r >= full) return probe;
    const SvdResult s = svd(probe.W);
    LinearProbe out = probe;
    out.W = s.U.leftCols(r) * s.S.head(r).asDiagonal() * s.V.leftCols(r).transpose();
    out.b = probe.y_mean - out.W * probe.x_mean;
    out.rank = r;
    return out;
}

Eigen::MatrixXd predict(const LinearProbe& probe, const Eigen::MatrixXd& X) {
    if (X.cols() != probe.W.cols()) {
        throw Error(ErrorKind::dimension, "probe expects d=" + std::to_string(probe.W.cols()) + " features, got " +
                                              std::to_string(X.cols()));
    }
    return (X * probe.W.transpose()).rowwise() + probe.b.transpose();
}

Grid Grid::paper_default() { return Grid{{3, 4, 5, 6, 8}, {1.0, 10.0, 100.0, 1000.0}}; }

SweepResult sweep(const Samples& train, const Samples& test, const Grid& grid, const FitOptions& options) {
    if (grid.ranks.empty() || grid.alphas.empty()) throw Error(ErrorKind::invalid_argument, "empty hyperparameter grid");
    if (train.X.cols() != test.X.cols() || train.Y.cols() != test.Y.cols()) {
        throw Error(ErrorKind::dimension, "train and test designs disagree in width");
    }
    const std::size_t nr = grid.ranks.size();
    const std::size_t na = grid.alphas.size();
    std::vector<SweepCell> cells(nr * na);

    // One ridge solve per alpha; ranks are cheap truncations of it.
    const auto n_alpha = static_cast<std::ptrdiff_t>(na);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ai = 0; ai < n_alpha; ++ai) {
        const auto a = static_cast<std::size_t>(ai);
        const double alpha = grid.alphas[a];
        std::optional<LinearProbe> full;
        std::string fit_error;
        try {
            full = fit_ridge(train.X, train.Y, alpha, options);
        } catch (const std::exception& e) {
            fit_error = e.what();
        }
        for (std::size_t r = 0; r < nr; ++r) {
            SweepCell& cell = cells[r * na + a];
            cell.rank = grid.ranks[r];
            cell.alpha = alpha;
            if (!full) {
                cell.error = fit_error;
                continue;
            }
            try {
                const LinearProbe probe = rrr_truncate(*full, cell.rank);
                const EvalReport rep = evaluate(test.Y, predict(probe, test.X));
                cell.holdout_r2_uniform = rep.r2_uniform_mean;
                cell.mae = rep.mae;
                if (!rep.r2_uniform_mean) cell.error = "R^2 undefined for every target";
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    }

    const SweepCell* best = nullptr;
    for (const auto& c : cells) {
        if (!c.ok()) continue;
        if (best == nullptr || *c.holdout_r2_uniform > *best->holdout_r2_uniform ||
            (*c.holdout_r2_uniform == *best->holdout_r2_uniform &&
             (c.rank < best->rank || (c.rank == best->rank && c.alpha > best->alpha)))) {
            best = &c;
        }
    }
    if (best == nullptr) {
        throw Error(cells.front().error.find("singular") != std::string::npos ? ErrorKind::singular
                                                                              : ErrorKind::numeric,
                    "every grid cell failed; first error: " + cells.front().error);
    }

    SweepResult out;
    out.best_rank = best->rank;
    out.best_alpha = best->alpha;
    out.best_probe = rrr_truncate(fit_ridge(train.X, train.Y, out.best_alpha, options), out.best_rank);
    out.best_report = evaluate(test.Y, predict(out.best_probe, test.X));
    out.grid = std::move(cells);
    return out;
}

void save_probe(const std::filesystem::path& dir, const LinearProbe& probe, const std::string& stem) {
    std::filesystem::create_directories(dir);
    const std::string w = stem + "_W.npy";
    const std::string b = stem + "_b.npy";
    const std::string xm = stem + "_x_mean.npy";
    const std::string ym = stem + "_y_mean.npy";
    write_tensor(dir / w, TensorFile::from_matrix(probe.W));
    write_tensor(dir / b, TensorFile::from_vector(probe.b));
    write_tensor(dir / xm, TensorFile::from_vector(probe.x_mean));
    write_tensor(dir / ym, TensorFile::from_vector(probe.y_mean));
    nlohmann::json j;
    j["model_id"] = probe.model_id;
    j["layer"] = probe.layer;
    j["rank"] = probe.rank;
    j["alpha"] = probe.alpha;
    j["target_names"] = probe.target_names;
    j["W_file"] = w;
    j["b_file"] = b;
    j["x_mean_file"] = xm;
    j["y_mean_file"] = ym;
    std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write probe metadata in " + dir.string());
    out << j.dump(2) << '\n';
}

LinearProbe load_probe(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error(ErrorKind::io, "cannot open probe " + json_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, std::string("probe metadata: ") + e.what());
    }
    const auto dir = json_path.parent_path();
    LinearProbe p;
    try {
        p.model_id = j.value("model_id", std::string{});
        p.layer = j.value("layer", 0);
        p.rank = j.at("rank").get<int>();
        p.alpha = j.at("alpha").get<double>();
        p.target_names = j.value("target_names", std::vector<std::string>{});
        p.W = read_tensor(dir / j.at("W_file").get<std::string>()).to_matrix();
        p.b = read_tensor(dir / j.at("b_file").get<std::string>()).to_matrix().col(0);
        p.x_mean = read_tensor(dir / j.at("x_mean_file").get<std::string>()).to_matrix().col(0);
        p.y_mean = read_tensor(dir / j.at("y_mean_file").get<std::string>()).to_matrix().col(0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, std::string("probe metadata: ") + e.what());
    }
    if (p.b.size() != p.W.rows() || p.x_mean.size() != p.W.cols() || p.y_mean.size() != p.W.rows()) {
        throw Error(ErrorKind::dimension, "probe payload shapes are inconsistent");
    }
    return p;
}

}  // namespace geoprobe
