#include "geoprobe/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoprobe/error.hpp"
#include "geoprobe/log.hpp"
#include "geoprobe/rng.hpp"

namespace geoprobe {

std::pair<Samples, Samples> split_samples(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split) {
    if (X.rows() != Y.rows()) throw Error(ErrorKind::dimension, "feature and target rows differ");
    validate_split(split, static_cast<std::size_t>(X.rows()));
    const Samples all{X, Y};
    return {all.rows(split.train), all.rows(split.test)};
}

SweepResult sweep_split(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split, const Grid& grid,
                        const FitOptions& options) {
    const auto [train, test] = split_samples(X, Y, split);
    return sweep(train, test, grid, options);
}

LayerCurve best_layer_curve(std::vector<int> layers, std::vector<double> r2) {
    if (layers.empty() || layers.size() != r2.size()) {
        throw Error(ErrorKind::experiment, "layer curve needs one R^2 value per layer");
    }
    LayerCurve c;
    std::size_t best = 0;
    for (std::size_t i = 1; i < layers.size(); ++i) {
        if (r2[i] > r2[best] || (r2[i] == r2[best] && layers[i] > layers[best])) best = i;
    }
    c.best_layer = layers[best];
    c.layers = std::move(layers);
    c.r2 = std::move(r2);
    return c;
}

LayerCurve layer_sweep(const std::vector<LoadedDataset>& per_layer, const Grid& grid, const FitOptions& options) {
    if (per_layer.empty()) throw Error(ErrorKind::experiment, "layer sweep needs at least one layer");
    const auto& ref = per_layer.front();
    for (const auto& ds : per_layer) {
        if (ds.targets.split.train != ref.targets.split.train || ds.targets.split.test != ref.targets.split.test) {
            throw Error(ErrorKind::experiment, "layer " + std::to_string(ds.manifest.layer) +
                                                   " uses a different train/test split");
        }
        if (ds.features.tokens.n != ref.features.tokens.n) {
            throw Error(ErrorKind::experiment, "layers disagree on the number of images");
        }
        if (ds.targets.values != ref.targets.values) {
            throw Error(ErrorKind::experiment, "layers disagree on the target tensor");
        }
    }
    std::vector<int> layers;
    std::vector<double> r2;
    std::vector<std::pair<int, double>> hp;
    for (const auto& ds : per_layer) {
        const Eigen::MatrixXd X = mean_pool(ds.features.tokens, ds.features.mask);
        const SweepResult s = sweep_split(X, ds.targets.values, ds.targets.split, grid, options);
        layers.push_back(ds.manifest.layer);
        r2.push_back(*s.best_report.r2_uniform_mean);
        hp.emplace_back(s.best_rank, s.best_alpha);
    }
    LayerCurve c = best_layer_curve(std::move(layers), std::move(r2));
    c.best_hp = std::move(hp);
    return c;
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t key) {
    if (folds < 2 || folds > n) throw Error(ErrorKind::invalid_argument, "need 2 <= folds <= n");
    CounterRng rng(key);
    const auto perm = permutation(n, rng);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n / folds;
        const std::size_t hi = (f + 1) * n / folds;
        for (std::size_t p = lo; p < hi; ++p) fold_of[perm[p]] = f;
    }
    return fold_of;
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold_split(const std::vector<std::size_t>& fold_of,
                                                                         std::size_t f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    return {train, test};
}

// Inner-CV choice of (rank, alpha): highest mean uniform R^2 across inner folds.
std::pair<int, double> select_hp(const Samples& data, const Grid& grid, const CvOptions& opt, std::size_t outer) {
    const std::size_t cells = grid.ranks.size() * grid.alphas.size();
    std::vector<double> sum(cells, 0.0);
    std::vector<bool> valid(cells, true);
    const auto fold_of = assign_folds(static_cast<std::size_t>(data.X.rows()), opt.inner_folds,
                                      derive_key(opt.seed, {0x1AA, outer}));
    for (std::size_t f = 0; f < opt.inner_folds; ++f) {
        const auto [tr, te] = fold_split(fold_of, f);
        std::vector<SweepCell> grid_cells;
        try {
            grid_cells = sweep(data.rows(tr), data.rows(te), grid, opt.fit).grid;
        } catch (const Error&) {
            std::fill(valid.begin(), valid.end(), false);
            break;
        }
        for (std::size_t c = 0; c < cells; ++c) {
            if (grid_cells[c].ok()) {
                sum[c] += *grid_cells[c].holdout_r2_uniform;
            } else {
                valid[c] = false;
            }
        }
    }
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cells; ++c) {
        if (!valid[c]) continue;
        if (!best) {
            best = c;
            continue;
        }
        const int r = grid.ranks[c / grid.alphas.size()];
        const double a = grid.alphas[c % grid.alphas.size()];
        const int br = grid.ranks[*best / grid.alphas.size()];
        const double ba = grid.alphas[*best % grid.alphas.size()];
        if (sum[c] > sum[*best] || (sum[c] == sum[*best] && (r < br || (r == br && a > ba)))) best = c;
    }
    if (!best) throw Error(ErrorKind::singular, "no grid cell could be fitted on every inner fold");
    return {grid.ranks[*best / grid.alphas.size()], grid.alphas[*best % grid.alphas.size()]};
}

}  // namespace

CvResult nested_cv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Grid& grid, const CvOptions& options) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n < 2 * options.outer_folds) {
        throw Error(ErrorKind::insufficient_data, "nested CV needs n >= 2 * outer_folds");
    }
    if (grid.ranks.empty() || grid.alphas.empty()) throw Error(ErrorKind::invalid_argument, "empty grid");
    CvResult r;
    r.fold_of = assign_folds(n, options.outer_folds, derive_key(options.seed, {0x0F0}));
    r.per_fold_r2.assign(options.outer_folds, std::nullopt);
    r.chosen_hp_per_fold.assign(options.outer_folds, {0, 0.0});
    r.fold_errors.assign(options.outer_folds, {});
    const Samples all{X, Y};

    const auto folds = static_cast<std::ptrdiff_t>(options.outer_folds);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ff = 0; ff < folds; ++ff) {
        const auto f = static_cast<std::size_t>(ff);
        try {
            const auto [tr, te] = fold_split(r.fold_of, f);
            const Samples train = all.rows(tr);
            const Samples test = all.rows(te);
            const auto hp = select_hp(train, grid, options, f);
            r.chosen_hp_per_fold[f] = hp;
            const LinearProbe probe = rrr_truncate(fit_ridge(train.X, train.Y, hp.second, options.fit), hp.first);
            r.per_fold_r2[f] = evaluate(test.Y, predict(probe, test.X)).r2_uniform_mean;
            if (!r.per_fold_r2[f]) r.fold_errors[f] = "R^2 undefined on the outer test fold";
        } catch (const std::exception& e) {
            r.fold_errors[f] = e.what();
        }
    }
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& v : r.per_fold_r2) {
        if (v) {
            sum += *v;
            ++ok;
        }
    }
    if (ok == 0) throw Error(ErrorKind::experiment, "every outer fold failed: " + r.fold_errors.front());
    r.mean = sum / static_cast<double>(ok);
    return r;
}

EquivalenceResult equivalence_cluster(const FoldTable& table, double delta, double level) {
    table.validate();
    const std::size_t M = table.models();
    if (M < 1) throw Error(ErrorKind::invalid_argument, "equivalence clustering needs at least one model");
    EquivalenceResult out;
    out.order.resize(M);
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    const Eigen::VectorXd means = table.values.rowwise().mean();
    std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = means(static_cast<Eigen::Index>(a));
        const double mb = means(static_cast<Eigen::Index>(b));
        if (ma != mb) return ma > mb;
        return table.model_names[a] < table.model_names[b];
    });

    auto row = [&](std::size_t m) {
        const Eigen::VectorXd v = table.values.row(static_cast<Eigen::Index>(m)).transpose();
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    std::vector<double> raw;
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = i + 1; j < M; ++j) {
            const auto a = row(i);
            const auto b = row(j);
            out.pairs.push_back({i, j, paired_tost(a, b, delta, level), 1.0});
            raw.push_back(out.pairs.back().tost.p_tost);
        }
    }
    const auto adjusted = holm_bonferroni(raw);
    Eigen::MatrixXd p_holm = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    for (std::size_t k = 0; k < out.pairs.size(); ++k) {
        out.pairs[k].p_holm = adjusted[k];
        const auto i = static_cast<Eigen::Index>(out.pairs[k].i);
        const auto j = static_cast<Eigen::Index>(out.pairs[k].j);
        p_holm(i, j) = p_holm(j, i) = adjusted[k];
    }

    std::vector<std::size_t> members{out.order.front()};
    for (std::size_t c = 1; c < M; ++c) {
        const std::size_t cand = out.order[c];
        const bool joins = std::all_of(members.begin(), members.end(), [&](std::size_t m) {
            return p_holm(static_cast<Eigen::Index>(cand), static_cast<Eigen::Index>(m)) < level;
        });
        if (joins) members.push_back(cand);
    }
    for (auto m : members) out.cluster.push_back(table.model_names[m]);
    return out;
}

AblationPair patch_ablation_experiment(const FeatureTensor& features, const TokenMask& mask, const Eigen::MatrixXd& Y,
                                       const SplitIndices& split, std::size_t k, const Grid& grid, std::uint64_t seed,
                                       AblationScope scope) {
    const MaskGrid base(features.n, mask);
    const SweepResult baseline = sweep_split(mean_pool(features, base), Y, split, grid);
    const double base_r2 = *baseline.best_report.r2_uniform_mean;

    auto run = [&](AblationMode mode) {
        AblationResult r;
        r.mode = mode;
        r.k = k;
        r.baseline_r2 = base_r2;
        if (k == 0) {
            r.ablated_r2 = base_r2;
        } else {
            const MaskGrid ablated = ablate_top_k(features, base, k, mode, derive_key(seed, {0xAB1}), scope);
            r.ablated_r2 = *sweep_split(mean_pool(features, ablated), Y, split, grid).best_report.r2_uniform_mean;
        }
        r.delta = r.ablated_r2 - r.baseline_r2;
        return r;
    };
    return {run(AblationMode::top_norm), run(AblationMode::random)};
}

std::vector<HeadResult> per_head_probe(const FeatureTensor& features, std::size_t heads, const TokenMask& mask,
                                       const Eigen::MatrixXd& Y, const SplitIndices& split, const Grid& grid) {
    if (heads == 0 || features.d % heads != 0) {
        throw Error(ErrorKind::head, "feature width " + std::to_string(features.d) + " is not divisible into " +
                                         std::to_string(heads) + " heads");
    }
    const std::size_t width = features.d / heads;
    std::vector<HeadResult> out(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const FeatureTensor block = heads == 1 ? features : features.slice_features(h * width, width);
        const SweepResult s = sweep_split(mean_pool(block, mask), Y, split, grid);
        out[h] = {h, s.best_report, s.best_rank, s.best_alpha};
    }
    return out;
}

HeadEntropyCorrelation head_entropy_correlation(const Eigen::MatrixXd& entropies, const Eigen::MatrixXd& Y) {
    if (entropies.rows() != Y.rows()) throw Error(ErrorKind::dimension, "entropy and target rows differ");
    if (entropies.rows() < 3) throw Error(ErrorKind::insufficient_data, "head-entropy correlation needs n >= 3");
    HeadEntropyCorrelation out;
    out.rho = Eigen::MatrixXd::Constant(entropies.cols(), Y.cols(), std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index h = 0; h < entropies.cols(); ++h) {
        const Eigen::VectorXd e = entropies.col(h);
        for (Eigen::Index k = 0; k < Y.cols(); ++k) {
            const Eigen::VectorXd y = Y.col(k);
            const SpearmanResult s = spearman(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())),
                                              std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
            if (!s.rho) continue;
            out.rho(h, k) = *s.rho;
            if (!out.max_abs_rho || std::abs(*s.rho) > *out.max_abs_rho) {
                out.max_abs_rho = std::abs(*s.rho);
                out.argmax_head = static_cast<std::size_t>(h);
                out.argmax_target = static_cast<std::size_t>(k);
            }
        }
    }
    return out;
}

EvalReport shuffled_target_control(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split,
                                   const Grid& grid, const std::vector<std::size_t>& train_perm,
                                   const std::vector<std::size_t>& test_perm) {
    if (train_perm.size() != split.train.size() || test_perm.size() != split.test.size()) {
        throw Error(ErrorKind::dimension, "permutation lengths must match the split");
    }
    Eigen::MatrixXd shuffled = Y;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        shuffled.row(static_cast<Eigen::Index>(split.train[i])) = Y.row(static_cast<Eigen::Index>(split.train[train_perm[i]]));
    }
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        shuffled.row(static_cast<Eigen::Index>(split.test[i])) = Y.row(static_cast<Eigen::Index>(split.test[test_perm[i]]));
    }
    return sweep_split(X, shuffled, split, grid).best_report;
}

ValidityReport validity_controls(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split,
                                 const Grid& grid, const std::optional<Eigen::MatrixXd>& pixels, std::uint64_t seed) {
    ValidityReport out;
    out.baseline = sweep_split(X, Y, split, grid).best_report;

    CounterRng train_rng(derive_key(seed, {0x5BF, 0}));
    CounterRng test_rng(derive_key(seed, {0x5BF, 1}));
    const auto train_perm = permutation(split.train.size(), train_rng);
    const auto test_perm = permutation(split.test.size(), test_rng);
    out.shuffled_targets = shuffled_target_control(X, Y, split, grid, train_perm, test_perm);

    Eigen::MatrixXd noise(X.rows(), X.cols());
    const auto rows = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        CounterRng rng(derive_key(seed, {0x4A5, static_cast<std::uint64_t>(i)}));
        for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(i, j) = rng.normal();
    }
    out.random_features = sweep_split(noise, Y, split, grid).best_report;

    if (pixels) {
        if (pixels->rows() != X.rows()) throw Error(ErrorKind::dimension, "pixel tensor rows != N");
        out.pixel_baseline = sweep_split(*pixels, Y, split, grid).best_report;
    } else {
        notice("no pixel tensor supplied; pixel-baseline control skipped");
    }
    return out;
}

}  // namespace geoprobe
