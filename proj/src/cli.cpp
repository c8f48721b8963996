#include "geoprobe/cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoprobe/error.hpp"
#include "geoprobe/experiments.hpp"
#include "geoprobe/log.hpp"
#include "geoprobe/report.hpp"
#include "geoprobe/rng.hpp"
#include "geoprobe/synth.hpp"

namespace geoprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads `--config` files: a JSON object whose keys are long flag names,
// optionally nested under a subcommand name.
class JsonConfig : public CLI::Config {
public:
    // Top-level scalar keys are attributed to `section`, the active subcommand.
    explicit JsonConfig(std::string section) : section_(std::move(section)) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        collect(j, {}, items);
        return items;
    }

private:
    std::string section_;

    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it->is_object()) {
                auto next = parents;
                next.push_back(it.key());
                collect(*it, next, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            if (item.parents.empty() && !section_.empty()) item.parents.push_back(section_);
            item.name = it.key();
            if (it->is_array()) {
                for (const auto& v : *it) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(*it));
            }
            items.push_back(std::move(item));
        }
    }
};

const Grid kPaperGrid = Grid::paper_default();
constexpr double kPaperDelta = 0.03;
constexpr double kPaperLevel = 0.05;
constexpr std::size_t kPaperB = 10000;
constexpr double kPaperCiLevel = 0.95;
constexpr std::size_t kPaperOuterFolds = 10;
constexpr std::size_t kPaperInnerFolds = 5;

struct Common {
    std::string out = "geoprobe-out";
    std::uint64_t seed = 0;
    bool paper_defaults = false;
};

struct GridOpts {
    std::vector<int> ranks = kPaperGrid.ranks;
    std::vector<double> alphas = kPaperGrid.alphas;
    bool unit_variance = false;
    Grid grid() const { return {ranks, alphas}; }
    FitOptions fit() const { return {unit_variance}; }
};

CLI::Option* add_out(CLI::App* sub, Common& c) {
    return sub->add_option("-o,--out", c.out, "Output directory")->envname("GEOPROBE_OUT")->capture_default_str();
}

void add_seed(CLI::App* sub, Common& c) { sub->add_option("--seed", c.seed, "Random seed")->capture_default_str(); }

// Grid flags plus --paper-defaults, which pins them and refuses overrides.
void add_grid(CLI::App* sub, Common& c, GridOpts& g, std::vector<CLI::Option*> extra_pinned = {}) {
    auto* ranks = sub->add_option("--ranks", g.ranks, "RRR ranks to sweep")->capture_default_str();
    auto* alphas = sub->add_option("--alphas", g.alphas, "Ridge penalties to sweep")->capture_default_str();
    sub->add_flag("--unit-variance", g.unit_variance, "Scale features to unit variance before fitting");
    auto* paper = sub->add_flag("--paper-defaults", c.paper_defaults, "Pin every hyperparameter to the published values");
    paper->excludes(ranks)->excludes(alphas);
    for (auto* o : extra_pinned) paper->excludes(o);
}

CLI::Option* add_manifest(CLI::App* sub, std::string& path) {
    return sub->add_option("manifest,--manifest", path, "Dataset manifest JSON")->required()->check(CLI::ExistingFile);
}

fs::path prepare_out(const std::string& out) {
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

Eigen::MatrixXd pooled(const LoadedDataset& ds) { return mean_pool(ds.features.tokens, ds.features.mask); }

json dataset_json(const LoadedDataset& ds) {
    return {{"model_id", ds.manifest.model_id},
            {"layer", ds.manifest.layer},
            {"dataset_name", ds.manifest.dataset_name},
            {"n", ds.features.tokens.n},
            {"n_train", ds.targets.split.train.size()},
            {"n_test", ds.targets.split.test.size()}};
}

json grid_json(const GridOpts& g) {
    return {{"ranks", g.ranks}, {"alphas", g.alphas}, {"unit_variance", g.unit_variance}};
}

std::string r2_text(const std::optional<double>& v) { return v ? report::format_double(*v) : "undefined"; }

void emit(const fs::path& dir, const std::string& name, const std::string& text, std::ostream& out) {
    report::write_text(dir / name, text);
    out << "wrote " << name << '\n';
}

// ------------------------------------------------------------------ fit

struct FitArgs {
    Common c;
    GridOpts g;
    std::string manifest;
    std::string stem = "probe";
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    SweepResult s = sweep_split(pooled(ds), ds.targets.values, ds.targets.split, a.g.grid(), a.g.fit());
    s.best_probe.layer = ds.manifest.layer;
    s.best_probe.model_id = ds.manifest.model_id;
    s.best_probe.target_names = ds.targets.names;
    s.best_report.target_names = ds.targets.names;

    const fs::path dir = prepare_out(a.c.out);
    save_probe(dir, s.best_probe, a.stem);
    json j = dataset_json(ds);
    j["grid_settings"] = grid_json(a.g);
    j["sweep"] = report::to_json(s);
    emit(dir, "fit.json", report::dump(j), out);
    emit(dir, "fit_grid.csv", report::sweep_csv(s), out);
    emit(dir, "fit_eval.csv", report::eval_csv(s.best_report), out);
    out << "best rank=" << s.best_rank << " alpha=" << report::format_double(s.best_alpha)
        << " r2_uniform_mean=" << r2_text(s.best_report.r2_uniform_mean)
        << " mae=" << report::format_double(s.best_report.mae) << '\n';
}

// ------------------------------------------------------------------ compare

struct CompareArgs {
    Common c;
    std::string table;
    double delta = kPaperDelta;
    double level = kPaperLevel;
    double cd_level = 0.05;
};

void cmd_compare(const CompareArgs& a, std::ostream& out) {
    const FoldTable table = report::read_fold_table(a.table);
    const std::size_t M = table.models();
    const std::size_t F = table.folds();
    json j = {{"models", table.model_names}, {"folds", F}, {"delta", a.delta}, {"level", a.level}};

    if (M >= 3) {
        const FriedmanResult fr = friedman(table);
        j["friedman"] = report::to_json(fr);
        out << "friedman chi2=" << report::format_double(fr.chi2) << " df=" << fr.df
            << " p=" << report::format_double(fr.p) << '\n';
    } else {
        notice("fewer than 3 models; Friedman test skipped");
        j["friedman"] = nullptr;
    }
    if (M >= 2 && M <= 20) {
        const double cd = nemenyi_cd(M, F, a.cd_level);
        j["nemenyi"] = {{"level", a.cd_level}, {"q", nemenyi_q(M, a.cd_level)}, {"cd", cd}};
        out << "nemenyi cd=" << report::format_double(cd) << '\n';
    } else {
        notice("Nemenyi critical difference is tabulated for 2 to 20 models only; skipped");
        j["nemenyi"] = nullptr;
    }
    const EquivalenceResult eq = equivalence_cluster(table, a.delta, a.level);
    j["equivalence"] = report::to_json(eq, table);

    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "compare.json", report::dump(j), out);
    emit(dir, "compare_tost.csv", report::tost_csv(eq, table), out);
    out << "cluster:";
    for (const auto& m : eq.cluster) out << ' ' << m;
    out << '\n';
}

// ------------------------------------------------------------------ cka

struct CkaArgs {
    Common c;
    std::vector<std::string> manifests;
    std::string matrix;
    std::vector<double> r2;
    std::vector<std::string> names;
};

void cmd_cka(const CkaArgs& a, std::ostream& out) {
    CkaMatrix m;
    if (!a.matrix.empty()) {
        m = report::parse_cka_csv(report::read_text(a.matrix));
    } else {
        std::vector<Eigen::MatrixXd> reps;
        std::vector<std::string> names;
        std::optional<SplitIndices> split;
        for (const auto& path : a.manifests) {
            const LoadedDataset ds = load_dataset(fs::path(path));
            if (!reps.empty() && static_cast<Eigen::Index>(ds.features.tokens.n) != reps.front().rows()) {
                throw Error(ErrorKind::alignment, "manifest '" + path + "' has " + std::to_string(ds.features.tokens.n) +
                                                      " samples, expected " + std::to_string(reps.front().rows()));
            }
            if (split && (split->train != ds.targets.split.train || split->test != ds.targets.split.test)) {
                throw Error(ErrorKind::alignment, "manifest '" + path + "' orders its samples differently");
            }
            split = ds.targets.split;
            reps.push_back(pooled(ds));
            names.push_back(ds.manifest.model_id);
        }
        m = cka_matrix(reps, std::move(names));
    }
    if (!a.names.empty()) {
        if (a.names.size() != m.models.size()) {
            throw Error(ErrorKind::invalid_argument, "--names needs one entry per model");
        }
        m.models = a.names;
    }

    const fs::path dir = prepare_out(a.c.out);
    json j = {{"matrix", report::to_json(m)}};
    std::optional<CkaGapAnalysis> gap;
    if (!a.r2.empty()) {
        if (a.r2.size() != m.models.size()) {
            throw Error(ErrorKind::invalid_argument, "--r2 needs one value per model (" + std::to_string(m.models.size()) + ")");
        }
        if (m.models.size() < 3) {
            notice("fewer than 3 models; CKA gap analysis skipped");
            j["gap_analysis"] = nullptr;
        } else {
            gap = cka_gap_analysis(m, a.r2);
            j["gap_analysis"] = report::to_json(*gap, m);
        }
    }
    emit(dir, "cka.csv", report::cka_csv(m), out);
    emit(dir, "cka.json", report::dump(j), out);
    if (gap) {
        emit(dir, "cka_pairs.csv", report::cka_pairs_csv(*gap, m), out);
        out << "spearman rho=" << r2_text(gap->rho) << " p=" << r2_text(gap->p) << '\n';
    }
}

// ------------------------------------------------------------------ bootstrap

struct BootstrapArgs {
    Common c;
    std::string manifest;
    std::string probe;
    std::size_t B = kPaperB;
    double level = kPaperCiLevel;
    std::string model;
};

// Uniform-mean R^2 on a resample of rows; NaN when no target has variance.
double resampled_r2(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat, std::span<const std::size_t> idx) {
    const auto n = static_cast<double>(idx.size());
    double sum = 0.0;
    int defined = 0;
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        double mean = 0.0;
        for (auto i : idx) mean += Y(static_cast<Eigen::Index>(i), k);
        mean /= n;
        double ss_tot = 0.0;
        double ss_res = 0.0;
        for (auto i : idx) {
            const auto r = static_cast<Eigen::Index>(i);
            ss_tot += (Y(r, k) - mean) * (Y(r, k) - mean);
            ss_res += (Y(r, k) - Yhat(r, k)) * (Y(r, k) - Yhat(r, k));
        }
        if (ss_tot > 0.0) {
            sum += 1.0 - ss_res / ss_tot;
            ++defined;
        }
    }
    return defined > 0 ? sum / defined : std::nan("");
}

void cmd_bootstrap(const BootstrapArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    const LinearProbe probe = load_probe(a.probe);
    const Eigen::MatrixXd X = pooled(ds);
    if (probe.features() != X.cols() || probe.targets() != ds.targets.values.cols()) {
        throw Error(ErrorKind::dimension, "probe shape does not match the dataset");
    }
    const auto [train, test] = split_samples(X, ds.targets.values, ds.targets.split);
    const Eigen::MatrixXd Yhat = predict(probe, test.X);
    const Eigen::MatrixXd& Y = test.Y;
    const Statistic stat = [&](std::span<const std::size_t> idx) { return resampled_r2(Y, Yhat, idx); };
    const BootstrapCI ci = bca_ci(static_cast<std::size_t>(Y.rows()), stat, a.B, a.level, a.c.seed);

    const std::string model = a.model.empty() ? ds.manifest.model_id : a.model;
    json j = dataset_json(ds);
    j["seed"] = a.c.seed;
    j["bootstrap"] = report::to_json(ci);
    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "bootstrap.json", report::dump(j), out);
    emit(dir, "bootstrap.csv", report::bootstrap_csv(model, ci), out);
    out << model << " r2=" << report::format_double(ci.point) << " [" << report::format_double(ci.lower) << ", "
        << report::format_double(ci.upper) << "]\n";
}

// ------------------------------------------------------------------ layers

struct LayersArgs {
    Common c;
    GridOpts g;
    std::vector<std::string> manifests;
    std::string precomputed;
};

void cmd_layers(const LayersArgs& a, std::ostream& out) {
    LayerCurve curve;
    if (!a.precomputed.empty()) {
        curve = report::parse_layer_csv(report::read_text(a.precomputed));
    } else {
        std::vector<LoadedDataset> per_layer;
        for (const auto& m : a.manifests) per_layer.push_back(load_dataset(fs::path(m)));
        curve = layer_sweep(per_layer, a.g.grid(), a.g.fit());
    }
    const fs::path dir = prepare_out(a.c.out);
    json j = report::to_json(curve);
    if (a.precomputed.empty()) j["grid_settings"] = grid_json(a.g);
    emit(dir, "layers.json", report::dump(j), out);
    emit(dir, "layers.csv", report::layer_csv(curve), out);
    out << "best layer=" << curve.best_layer << '\n';
}

// ------------------------------------------------------------------ cv

struct CvArgs {
    Common c;
    GridOpts g;
    std::string manifest;
    std::size_t outer = kPaperOuterFolds;
    std::size_t inner = kPaperInnerFolds;
};

void cmd_cv(const CvArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    CvOptions opt;
    opt.outer_folds = a.outer;
    opt.inner_folds = a.inner;
    opt.seed = a.c.seed;
    opt.fit = a.g.fit();
    const CvResult r = nested_cv(pooled(ds), ds.targets.values, a.g.grid(), opt);
    json j = dataset_json(ds);
    j["grid_settings"] = grid_json(a.g);
    j["outer_folds"] = a.outer;
    j["inner_folds"] = a.inner;
    j["seed"] = a.c.seed;
    j["cv"] = report::to_json(r);
    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "cv.json", report::dump(j), out);
    emit(dir, "cv.csv", report::cv_csv(r), out);
    out << "mean r2=" << report::format_double(r.mean) << '\n';
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
    Common c;
    GridOpts g;
    std::string manifest;
    std::size_t k = 1;
    std::string scope = "per-image";
};

void cmd_ablate(const AblateArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    if (ds.features.prepooled) throw Error(ErrorKind::ablation, "ablation needs token-level features");
    const AblationScope scope = a.scope == "global" ? AblationScope::global : AblationScope::per_image;
    const AblationPair r = patch_ablation_experiment(ds.features.tokens, ds.features.mask, ds.targets.values,
                                                     ds.targets.split, a.k, a.g.grid(), a.c.seed, scope);
    json j = dataset_json(ds);
    j["grid_settings"] = grid_json(a.g);
    j["scope"] = a.scope;
    j["seed"] = a.c.seed;
    j["ablation"] = report::to_json(r);
    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "ablation.json", report::dump(j), out);
    emit(dir, "ablation.csv", report::ablation_csv(r), out);
    out << "top_norm delta=" << report::format_double(r.top_norm.delta)
        << " random delta=" << report::format_double(r.random.delta) << '\n';
}

// ------------------------------------------------------------------ heads

struct HeadsArgs {
    Common c;
    GridOpts g;
    std::string manifest;
    std::size_t heads = 0;
};

void cmd_heads(const HeadsArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    const auto results = per_head_probe(ds.features.tokens, a.heads, ds.features.mask, ds.targets.values,
                                        ds.targets.split, a.g.grid());
    json j = dataset_json(ds);
    j["grid_settings"] = grid_json(a.g);
    j["heads"] = report::to_json(results);
    if (ds.features.attention_entropy) {
        j["entropy_correlation"] = report::to_json(head_entropy_correlation(*ds.features.attention_entropy, ds.targets.values));
    } else {
        j["entropy_correlation"] = nullptr;
    }
    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "heads.json", report::dump(j), out);
    emit(dir, "heads.csv", report::heads_csv(results), out);
    std::size_t best = 0;
    for (std::size_t h = 1; h < results.size(); ++h) {
        if (results[h].report.r2_uniform_mean.value_or(-INFINITY) >
            results[best].report.r2_uniform_mean.value_or(-INFINITY)) {
            best = h;
        }
    }
    out << "best head=" << best << " r2_uniform_mean=" << r2_text(results[best].report.r2_uniform_mean) << '\n';
}

// ------------------------------------------------------------------ validate

struct ValidateArgs {
    Common c;
    GridOpts g;
    std::string manifest;
};

void cmd_validate(const ValidateArgs& a, std::ostream& out) {
    const LoadedDataset ds = load_dataset(fs::path(a.manifest));
    const ValidityReport r = validity_controls(pooled(ds), ds.targets.values, ds.targets.split, a.g.grid(),
                                               ds.features.pixels, a.c.seed);
    json j = dataset_json(ds);
    j["grid_settings"] = grid_json(a.g);
    j["seed"] = a.c.seed;
    j["validity"] = report::to_json(r);
    const fs::path dir = prepare_out(a.c.out);
    emit(dir, "validity.json", report::dump(j), out);
    emit(dir, "validity.csv", report::validity_csv(r), out);
    out << "baseline=" << r2_text(r.baseline.r2_uniform_mean)
        << " shuffled=" << r2_text(r.shuffled_targets.r2_uniform_mean)
        << " random=" << r2_text(r.random_features.r2_uniform_mean);
    if (r.pixel_baseline) out << " pixels=" << r2_text(r.pixel_baseline->r2_uniform_mean);
    out << '\n';
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    Common c;
    SynthSpec spec;
    std::string kind = "planted";
    std::vector<std::size_t> signal_patches;
    std::vector<double> target_stds;
    double train_fraction = 0.8;
    std::string dtype = "f32";
    std::string model_id = "synth";
    int layer = 0;
    std::size_t pixel_dim = 0;
};

void cmd_synth(SynthArgs a, std::ostream& out) {
    a.spec.seed = a.c.seed;
    if (!a.signal_patches.empty()) a.spec.signal_patches = a.signal_patches;
    if (!a.target_stds.empty()) a.spec.target_stds = a.target_stds;
    SynthData data;
    if (a.kind == "planted") {
        data = gen_planted_linear(a.spec);
    } else if (a.kind == "concentrated") {
        data = gen_concentrated(a.spec);
    } else {
        data = gen_low_variance_target(a.spec);
    }
    SynthWriteOptions w;
    w.model_id = a.model_id;
    w.layer = a.layer;
    w.train_fraction = a.train_fraction;
    w.dtype = a.dtype == "f64" ? DType::float64 : DType::float32;
    w.split_seed = derive_key(a.c.seed, {0x5E1});
    if (a.pixel_dim > 0) {
        // Target-independent stand-in for flattened images.
        Eigen::MatrixXd pixels(static_cast<Eigen::Index>(a.spec.n), static_cast<Eigen::Index>(a.pixel_dim));
        for (Eigen::Index i = 0; i < pixels.rows(); ++i) {
            CounterRng rng(derive_key(a.c.seed, {0x91C, static_cast<std::uint64_t>(i)}));
            for (Eigen::Index j = 0; j < pixels.cols(); ++j) pixels(i, j) = rng.uniform();
        }
        w.pixels = std::move(pixels);
    }
    const fs::path dir = prepare_out(a.c.out);
    write_synth_dataset(data, dir, w);
    json truth = {{"kind", a.kind},
                  {"seed", a.c.seed},
                  {"n", a.spec.n},
                  {"T", a.spec.T},
                  {"d", a.spec.d},
                  {"K", a.spec.K},
                  {"rank", a.spec.rank},
                  {"noise_sigma", a.spec.noise_sigma},
                  {"signal_var", std::vector<double>(data.signal_var.data(), data.signal_var.data() + data.signal_var.size())},
                  {"population_r2",
                   std::vector<double>(data.population_r2.data(), data.population_r2.data() + data.population_r2.size())}};
    write_tensor(dir / "true_W.npy", TensorFile::from_matrix(data.true_W));
    emit(dir, "synth.json", report::dump(truth), out);
    out << "wrote manifest.json\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear and attention-pooled probes over frozen vision features", "geoprobe"};
    app.require_subcommand(1);
    app.fallthrough();
    const std::string section = !args.empty() && !args.front().empty() && args.front().front() != '-' ? args.front() : "";
    app.config_formatter(std::make_shared<JsonConfig>(section));
    app.set_config("--config", "", "JSON file whose keys mirror the command-line flags");

    FitArgs fit;
    auto* s_fit = app.add_subcommand("fit", "Sweep the RRR grid on one dataset and save the best probe");
    add_manifest(s_fit, fit.manifest);
    add_out(s_fit, fit.c);
    add_grid(s_fit, fit.c, fit.g);
    s_fit->add_option("--stem", fit.stem, "File stem for the saved probe")->capture_default_str();

    CompareArgs cmp;
    auto* s_cmp = app.add_subcommand("compare", "Friedman, Nemenyi CD and TOST equivalence over a fold table");
    s_cmp->add_option("table,--table", cmp.table, "CSV: model column then one column per fold")
        ->required()
        ->check(CLI::ExistingFile);
    add_out(s_cmp, cmp.c);
    auto* o_delta = s_cmp->add_option("--delta", cmp.delta, "Equivalence margin")->capture_default_str();
    auto* o_level = s_cmp->add_option("--level", cmp.level, "TOST significance level")->capture_default_str();
    s_cmp->add_option("--cd-level", cmp.cd_level, "Nemenyi level (0.05 or 0.10)")->capture_default_str();
    s_cmp->add_flag("--paper-defaults", cmp.c.paper_defaults, "Pin every hyperparameter to the published values")
        ->excludes(o_delta)
        ->excludes(o_level);

    CkaArgs cka;
    auto* s_cka = app.add_subcommand("cka", "Pairwise linear CKA and its relation to R^2 gaps");
    auto* o_manifests = s_cka->add_option("manifests", cka.manifests, "Dataset manifests sharing sample order")
                            ->check(CLI::ExistingFile);
    auto* o_matrix = s_cka->add_option("--matrix", cka.matrix, "Precomputed CKA matrix CSV")->check(CLI::ExistingFile);
    o_matrix->excludes(o_manifests);
    s_cka->add_option("--r2", cka.r2, "Per-model R^2, in model order");
    s_cka->add_option("--names", cka.names, "Override model names");
    add_out(s_cka, cka.c);

    BootstrapArgs bs;
    auto* s_bs = app.add_subcommand("bootstrap", "BCa interval for test-set uniform R^2 of a fitted probe");
    add_manifest(s_bs, bs.manifest);
    s_bs->add_option("--probe", bs.probe, "Probe JSON written by fit")->required()->check(CLI::ExistingFile);
    auto* o_b = s_bs->add_option("-B,--B", bs.B, "Bootstrap resamples")->capture_default_str();
    auto* o_ci = s_bs->add_option("--level", bs.level, "Confidence level")->capture_default_str();
    s_bs->add_option("--model", bs.model, "Model label for the CSV row (default: manifest model_id)");
    add_out(s_bs, bs.c);
    add_seed(s_bs, bs.c);
    s_bs->add_flag("--paper-defaults", bs.c.paper_defaults, "Pin every hyperparameter to the published values")
        ->excludes(o_b)
        ->excludes(o_ci);

    LayersArgs lay;
    auto* s_lay = app.add_subcommand("layers", "Per-layer sweep and best-layer selection");
    auto* o_lay_m = s_lay->add_option("manifests", lay.manifests, "One manifest per layer")->check(CLI::ExistingFile);
    s_lay->add_option("--precomputed", lay.precomputed, "CSV of layer,r2 rows")
        ->check(CLI::ExistingFile)
        ->excludes(o_lay_m);
    add_out(s_lay, lay.c);
    add_grid(s_lay, lay.c, lay.g);

    CvArgs cv;
    auto* s_cv = app.add_subcommand("cv", "Nested cross-validation with inner grid selection");
    add_manifest(s_cv, cv.manifest);
    add_out(s_cv, cv.c);
    add_seed(s_cv, cv.c);
    auto* o_outer = s_cv->add_option("--outer-folds", cv.outer, "Outer folds")->capture_default_str();
    auto* o_inner = s_cv->add_option("--inner-folds", cv.inner, "Inner folds")->capture_default_str();
    add_grid(s_cv, cv.c, cv.g, {o_outer, o_inner});

    AblateArgs abl;
    auto* s_abl = app.add_subcommand("ablate", "Top-norm versus random patch ablation");
    add_manifest(s_abl, abl.manifest);
    add_out(s_abl, abl.c);
    add_seed(s_abl, abl.c);
    s_abl->add_option("-k,--k", abl.k, "Patches removed per image")->capture_default_str();
    s_abl->add_option("--scope", abl.scope, "Norm ranking scope")
        ->check(CLI::IsMember({"per-image", "global"}))
        ->capture_default_str();
    add_grid(s_abl, abl.c, abl.g);

    HeadsArgs hd;
    auto* s_hd = app.add_subcommand("heads", "Probe each attention head's feature slice");
    add_manifest(s_hd, hd.manifest);
    add_out(s_hd, hd.c);
    s_hd->add_option("--heads", hd.heads, "Number of heads the feature width splits into")->required();
    add_grid(s_hd, hd.c, hd.g);

    ValidateArgs val;
    auto* s_val = app.add_subcommand("validate", "Shuffled-target, random-feature and pixel controls");
    add_manifest(s_val, val.manifest);
    add_out(s_val, val.c);
    add_seed(s_val, val.c);
    add_grid(s_val, val.c, val.g);

    SynthArgs syn;
    auto* s_syn = app.add_subcommand("synth", "Write a synthetic dataset with known ground truth");
    s_syn->add_option("--kind", syn.kind, "Generator")
        ->check(CLI::IsMember({"planted", "concentrated", "low-variance"}))
        ->capture_default_str();
    s_syn->add_option("--n", syn.spec.n, "Images")->capture_default_str();
    s_syn->add_option("--T", syn.spec.T, "Tokens per image")->capture_default_str();
    s_syn->add_option("--d", syn.spec.d, "Feature width")->capture_default_str();
    s_syn->add_option("--K", syn.spec.K, "Targets")->capture_default_str();
    s_syn->add_option("--rank", syn.spec.rank, "Planted rank")->capture_default_str();
    s_syn->add_option("--sigma", syn.spec.noise_sigma, "Target noise standard deviation")->capture_default_str();
    s_syn->add_option("--signal-patches", syn.signal_patches, "Token positions carrying the signal");
    s_syn->add_option("--target-stds", syn.target_stds, "Per-target standard deviations");
    s_syn->add_option("--signal-norm-ratio", syn.spec.signal_norm_ratio, "Signal to noise patch norm ratio")
        ->capture_default_str();
    s_syn->add_option("--train-fraction", syn.train_fraction, "Training share of the split")->capture_default_str();
    s_syn->add_option("--dtype", syn.dtype, "Stored precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    s_syn->add_option("--model-id", syn.model_id, "Manifest model_id")->capture_default_str();
    s_syn->add_option("--layer", syn.layer, "Manifest layer")->capture_default_str();
    s_syn->add_option("--pixel-dim", syn.pixel_dim, "Also write a target-independent pixel tensor of this width");
    add_out(s_syn, syn.c);
    add_seed(s_syn, syn.c);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        if (s_cka->parsed() && cka.manifests.empty() && cka.matrix.empty()) {
            throw CLI::RequiredError("cka needs manifests or --matrix");
        }
        if (s_lay->parsed() && lay.manifests.empty() && lay.precomputed.empty()) {
            throw CLI::RequiredError("layers needs manifests or --precomputed");
        }
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (s_fit->parsed()) cmd_fit(fit, out);
        else if (s_cmp->parsed()) cmd_compare(cmp, out);
        else if (s_cka->parsed()) cmd_cka(cka, out);
        else if (s_bs->parsed()) cmd_bootstrap(bs, out);
        else if (s_lay->parsed()) cmd_layers(lay, out);
        else if (s_cv->parsed()) cmd_cv(cv, out);
        else if (s_abl->parsed()) cmd_ablate(abl, out);
        else if (s_hd->parsed()) cmd_heads(hd, out);
        else if (s_val->parsed()) cmd_validate(val, out);
        else if (s_syn->parsed()) cmd_synth(syn, out);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return e.kind() == ErrorKind::invalid_argument ? exit_usage : exit_computation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_computation;
    }
    return exit_ok;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace geoprobe::cli
