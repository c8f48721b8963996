#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "geoprobe/error.hpp"
#include "geoprobe/experiments.hpp"
#include "geoprobe/report.hpp"
#include "geoprobe/synth.hpp"
#include "helpers.hpp"

using namespace geoprobe;

namespace {

SynthSpec planted_spec(std::size_t n, std::size_t d, double sigma, std::uint64_t seed) {
    SynthSpec s;
    s.n = n;
    s.T = 2;
    s.d = d;
    s.K = 3;
    s.rank = 3;
    s.noise_sigma = sigma;
    s.seed = seed;
    return s;
}

LoadedDataset as_dataset(const FeatureTensor& f, const Eigen::MatrixXd& Y, const SplitIndices& split, int layer) {
    LoadedDataset ds;
    ds.manifest.layer = layer;
    ds.features.tokens = f;
    ds.features.mask = TokenMask(f.t, true);
    ds.targets.values = Y;
    ds.targets.split = split;
    return ds;
}

FoldTable fold_table(const std::vector<std::string>& names, const Eigen::MatrixXd& values) {
    FoldTable t;
    t.model_names = names;
    t.values = values;
    return t;
}

}  // namespace

// ------------------------------------------------------------------ layers

TEST_CASE("best layer from precomputed values") {
    const LayerCurve dino = report::parse_layer_csv(report::read_text(std::string(GEOPROBE_FIXTURES) + "/layer_curve_dinov3.csv"));
    CHECK(dino.best_layer == 20);
    const LayerCurve sig = report::parse_layer_csv(report::read_text(std::string(GEOPROBE_FIXTURES) + "/layer_curve_siglip2.csv"));
    CHECK(sig.best_layer == 16);
    CHECK(best_layer_curve({7}, {0.1}).best_layer == 7);
    CHECK(best_layer_curve({1, 2, 3}, {0.5, 0.5, 0.4}).best_layer == 2);
    // Relabeling layers monotonically moves the argmax with them.
    CHECK(best_layer_curve({10, 40, 80, 120, 160, 200, 230}, dino.r2).best_layer == 200);
}

TEST_CASE("layer sweep finds the layer carrying the signal") {
    const SynthData d = gen_planted_linear(planted_spec(600, 12, 0.2, 1));
    const SplitIndices split = random_split(600, 0.8, 2);
    std::vector<LoadedDataset> layers;
    for (int l = 0; l < 3; ++l) {
        const FeatureTensor f = l == 2 ? d.features : testing::gaussian_tensor(600, 2, 12, 10 + l);
        layers.push_back(as_dataset(f, d.targets, split, l));
    }
    const LayerCurve c = layer_sweep(layers, Grid::paper_default());
    CHECK(c.best_layer == 2);
    CHECK(c.best_hp.size() == 3);
    CHECK(c.r2[2] > 0.9);

    layers[1].targets.split = random_split(600, 0.8, 3);
    try {
        layer_sweep(layers, Grid::paper_default());
        FAIL("expected experiment error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::experiment);
    }
}

// ------------------------------------------------------------------ nested CV

TEST_CASE("fold assignment is a partition") {
    const auto f = assign_folds(103, 10, 5);
    std::vector<int> sizes(10, 0);
    for (auto v : f) ++sizes[v];
    for (int s : sizes) CHECK((s == 10 || s == 11));
    CHECK(assign_folds(103, 10, 5) == f);
    CHECK_FALSE(assign_folds(103, 10, 6) == f);
}

TEST_CASE("noiseless nested CV") {
    const SynthData d = gen_planted_linear(planted_spec(300, 8, 0.0, 2));
    const Eigen::MatrixXd X = mean_pool(d.features, TokenMask(2, true));
    CvOptions opt;
    opt.seed = 4;
    const CvResult r = nested_cv(X, d.targets, Grid{{3, 4}, {1e-6, 1e-3}}, opt);
    REQUIRE(r.per_fold_r2.size() == 10);
    double s = 0.0;
    for (const auto& v : r.per_fold_r2) {
        CHECK(*v >= 0.999);
        s += *v;
    }
    CHECK(std::abs(r.mean - s / 10) < 1e-12);
    for (const auto& hp : r.chosen_hp_per_fold) CHECK(hp == r.chosen_hp_per_fold.front());
}

TEST_CASE("heavy noise pushes nested CV to large alpha") {
    const SynthData d = gen_planted_linear(planted_spec(120, 80, 3.0, 3));
    const Eigen::MatrixXd X = mean_pool(d.features, TokenMask(2, true));
    CvOptions opt;
    opt.seed = 1;
    const CvResult r = nested_cv(X, d.targets, Grid{{3}, {1, 1000}}, opt);
    int large = 0;
    for (const auto& hp : r.chosen_hp_per_fold) large += hp.second == 1000 ? 1 : 0;
    CHECK(large > 5);
}

TEST_CASE("nested CV is deterministic and validates size") {
    const SynthData d = gen_planted_linear(planted_spec(100, 6, 0.5, 4));
    const Eigen::MatrixXd X = mean_pool(d.features, TokenMask(2, true));
    CvOptions opt;
    opt.seed = 9;
    const CvResult a = nested_cv(X, d.targets, Grid::paper_default(), opt);
    const CvResult b = nested_cv(X, d.targets, Grid::paper_default(), opt);
    CHECK(a.mean == b.mean);
    CHECK(a.fold_of == b.fold_of);
    CHECK_THROWS_AS(nested_cv(X.topRows(15), d.targets.topRows(15), Grid::paper_default(), opt), Error);
}

// ------------------------------------------------------------------ equivalence

TEST_CASE("equivalence cluster") {
    SUBCASE("identical models form one cluster") {
        const Eigen::MatrixXd v = Eigen::RowVectorXd::LinSpaced(10, 0.5, 0.6).replicate(4, 1);
        const EquivalenceResult r = equivalence_cluster(fold_table({"a", "b", "c", "d"}, v));
        CHECK(r.cluster.size() == 4);
        CHECK(r.pairs.size() == 6);
    }
    SUBCASE("two separated groups") {
        Eigen::MatrixXd v(5, 10);
        const Eigen::MatrixXd jitter = testing::gaussian(5, 10, 3) * 0.002;
        for (int i = 0; i < 5; ++i) v.row(i) = Eigen::RowVectorXd::Constant(10, i < 3 ? 0.55 : 0.35) + jitter.row(i);
        const EquivalenceResult r = equivalence_cluster(fold_table({"t1", "t2", "t3", "b1", "b2"}, v));
        std::set<std::string> got(r.cluster.begin(), r.cluster.end());
        CHECK(got == std::set<std::string>{"t1", "t2", "t3"});

        // Input order does not matter.
        Eigen::MatrixXd w(5, 10);
        const std::vector<int> perm{4, 2, 0, 3, 1};
        std::vector<std::string> names;
        const std::vector<std::string> all{"t1", "t2", "t3", "b1", "b2"};
        for (int i = 0; i < 5; ++i) {
            w.row(i) = v.row(perm[static_cast<std::size_t>(i)]);
            names.push_back(all[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
        }
        const EquivalenceResult s = equivalence_cluster(fold_table(names, w));
        CHECK(std::set<std::string>(s.cluster.begin(), s.cluster.end()) == got);
        CHECK(s.cluster.front() == r.cluster.front());
    }
    SUBCASE("single model") {
        const EquivalenceResult r = equivalence_cluster(fold_table({"only"}, Eigen::MatrixXd::Constant(1, 5, 0.4)));
        CHECK(r.cluster == std::vector<std::string>{"only"});
    }
}

// ------------------------------------------------------------------ ablation

TEST_CASE("patch ablation") {
    SynthSpec s;
    s.n = 800;
    s.T = 50;
    s.d = 16;
    s.K = 3;
    s.rank = 3;
    s.noise_sigma = 0.1;
    s.signal_patches = std::vector<std::size_t>{3, 9, 21, 30, 44};
    s.seed = 5;
    const SynthData d = gen_concentrated(s);
    const SplitIndices split = random_split(800, 0.8, 1);
    const TokenMask mask(50, true);

    const AblationPair zero = patch_ablation_experiment(d.features, mask, d.targets, split, 0, Grid::paper_default(), 1);
    CHECK(zero.top_norm.delta == 0.0);
    CHECK(zero.random.delta == 0.0);

    const AblationPair r = patch_ablation_experiment(d.features, mask, d.targets, split, 5, Grid::paper_default(), 1);
    CHECK(r.top_norm.baseline_r2 == r.random.baseline_r2);
    CHECK(r.top_norm.delta == r.top_norm.ablated_r2 - r.top_norm.baseline_r2);
    CHECK(r.top_norm.delta <= -0.5);
    CHECK(std::abs(r.random.delta) < 0.2);
    const AblationPair again = patch_ablation_experiment(d.features, mask, d.targets, split, 5, Grid::paper_default(), 1);
    CHECK(again.random.ablated_r2 == r.random.ablated_r2);
}

// ------------------------------------------------------------------ heads

TEST_CASE("per-head probing") {
    const std::size_t n = 800;
    const FeatureTensor f = testing::gaussian_tensor(n, 3, 16, 7);
    const Eigen::MatrixXd pooled = mean_pool(f, TokenMask(3, true));
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 16);
    W.middleCols(8, 4) = testing::gaussian(2, 4, 8);
    const Eigen::MatrixXd Y = pooled * W.transpose() + 0.02 * testing::gaussian(static_cast<Eigen::Index>(n), 2, 9);
    const SplitIndices split = random_split(n, 0.8, 3);
    const TokenMask mask(3, true);

    const auto heads = per_head_probe(f, 4, mask, Y, split, Grid{{1, 2}, {1, 10}});
    REQUIRE(heads.size() == 4);
    for (std::size_t h = 0; h < 4; ++h) {
        if (h == 2) CHECK(*heads[h].report.r2_uniform_mean >= 0.9);
        else CHECK(*heads[h].report.r2_uniform_mean <= 0.1);
    }

    const auto one = per_head_probe(f, 1, mask, Y, split, Grid::paper_default());
    const SweepResult whole = sweep_split(pooled, Y, split, Grid::paper_default());
    CHECK(one.size() == 1);
    CHECK(one[0].report.r2_uniform_mean == whole.best_report.r2_uniform_mean);

    try {
        per_head_probe(f, 3, mask, Y, split, Grid::paper_default());
        FAIL("expected head error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::head);
    }
}

TEST_CASE("head entropy correlation") {
    const Eigen::MatrixXd Y = testing::gaussian(1600, 15, 1);
    Eigen::MatrixXd E = testing::gaussian(1600, 16, 2);
    const HeadEntropyCorrelation null = head_entropy_correlation(E, Y);
    CHECK(null.rho.size() == 240);
    CHECK(*null.max_abs_rho < 0.15);

    E.col(5) = Y.col(9);
    E.col(0).setConstant(1.0);
    const HeadEntropyCorrelation hit = head_entropy_correlation(E, Y);
    CHECK(*hit.max_abs_rho == doctest::Approx(1.0));
    CHECK(hit.argmax_head == 5);
    CHECK(hit.argmax_target == 9);
    CHECK(std::isnan(hit.rho(0, 0)));
}

// ------------------------------------------------------------------ validity

TEST_CASE("validity controls on planted data") {
    const SynthData d = gen_planted_linear(planted_spec(1000, 512, 0.3, 11));
    const Eigen::MatrixXd X = mean_pool(d.features, TokenMask(2, true));
    const SplitIndices split = random_split(1000, 0.8, 4);
    const Eigen::MatrixXd pixels = testing::gaussian(1000, 1000, 12).array().abs();
    const ValidityReport r = validity_controls(X, d.targets, split, Grid::paper_default(), pixels, 3);
    CHECK(*r.baseline.r2_uniform_mean > 0.8);
    CHECK(*r.shuffled_targets.r2_uniform_mean < 0.0);
    CHECK(*r.random_features.r2_uniform_mean < 0.0);
    REQUIRE(r.pixel_baseline.has_value());
    CHECK(*r.pixel_baseline->r2_uniform_mean < 0.0);

    const ValidityReport no_pixels = validity_controls(X, d.targets, split, Grid::paper_default(), std::nullopt, 3);
    CHECK_FALSE(no_pixels.pixel_baseline.has_value());
    CHECK(no_pixels.shuffled_targets.r2_uniform_mean == r.shuffled_targets.r2_uniform_mean);
}

TEST_CASE("identity permutation reproduces the baseline") {
    const SynthData d = gen_planted_linear(planted_spec(200, 6, 0.3, 12));
    const Eigen::MatrixXd X = mean_pool(d.features, TokenMask(2, true));
    const SplitIndices split = random_split(200, 0.8, 5);
    std::vector<std::size_t> tr(split.train.size());
    std::vector<std::size_t> te(split.test.size());
    std::iota(tr.begin(), tr.end(), std::size_t{0});
    std::iota(te.begin(), te.end(), std::size_t{0});
    const EvalReport same = shuffled_target_control(X, d.targets, split, Grid::paper_default(), tr, te);
    const EvalReport base = sweep_split(X, d.targets, split, Grid::paper_default()).best_report;
    CHECK(same.r2_uniform_mean == base.r2_uniform_mean);
    CHECK(same.mae == base.mae);
}
