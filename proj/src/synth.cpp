#include "geoprobe/synth.hpp"

#include <algorithm>
#include <cmath>

#include "geoprobe/error.hpp"
#include "geoprobe/rng.hpp"

namespace geoprobe {

namespace {

enum Stream : std::uint64_t { kFactorA = 1, kFactorB, kTokens, kNoise, kMarker, kSplit, kLatent };

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, std::uint64_t key) {
    CounterRng rng(key);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    }
    return m;
}

// Desired signal variance per target.
Eigen::VectorXd signal_targets(const SynthSpec& spec) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.K));
    if (spec.target_stds) {
        for (std::size_t k = 0; k < spec.K; ++k) {
            const double s = (*spec.target_stds)[k];
            v(static_cast<Eigen::Index>(k)) = s * s - spec.noise_sigma * spec.noise_sigma;
        }
    }
    return v;
}

void fill_tokens_gaussian(FeatureTensor& f, std::uint64_t seed) {
    const auto n = static_cast<std::ptrdiff_t>(f.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        CounterRng rng(derive_key(seed, {kTokens, static_cast<std::uint64_t>(i)}));
        const std::size_t stride = f.t * f.d;
        double* row = f.values.data() + static_cast<std::size_t>(i) * stride;
        for (std::size_t k = 0; k < stride; ++k) row[k] = rng.normal();
    }
}

void add_noise(SynthData& out, const SynthSpec& spec) {
    const auto n = static_cast<std::ptrdiff_t>(spec.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        CounterRng rng(derive_key(spec.seed, {kNoise, static_cast<std::uint64_t>(i)}));
        for (Eigen::Index k = 0; k < out.targets.cols(); ++k) out.targets(i, k) += spec.noise_sigma * rng.normal();
    }
}

void finish(SynthData& out, const SynthSpec& spec) {
    const double s2 = spec.noise_sigma * spec.noise_sigma;
    out.population_r2 = out.signal_var.array() / (out.signal_var.array() + s2);
}

}  // namespace

void SynthSpec::validate() const {
    if (n < 2 || T < 1 || d < 1 || K < 1) throw Error(ErrorKind::invalid_argument, "synthetic dimensions must be positive (n >= 2)");
    if (rank < 1 || rank > std::min(K, d)) throw Error(ErrorKind::invalid_argument, "planted rank must lie in [1, min(K, d)]");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::invalid_argument, "noise sigma must be nonnegative");
    if (signal_patches) {
        for (auto p : *signal_patches) {
            if (p >= T) throw Error(ErrorKind::invalid_argument, "signal patch index " + std::to_string(p) + " >= T");
        }
        auto sorted = *signal_patches;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error(ErrorKind::invalid_argument, "duplicate signal patch index");
        }
    }
    if (target_stds) {
        if (target_stds->size() != K) throw Error(ErrorKind::invalid_argument, "target_stds needs K entries");
        for (double s : *target_stds) {
            if (!(s > noise_sigma)) throw Error(ErrorKind::invalid_argument, "each target std must exceed noise sigma");
        }
    }
    if (!(signal_norm_ratio >= 1.0)) throw Error(ErrorKind::invalid_argument, "signal_norm_ratio must be >= 1");
}

SynthData gen_planted_linear(const SynthSpec& spec) {
    spec.validate();
    SynthData out;
    out.features = FeatureTensor(spec.n, spec.T, spec.d);
    fill_tokens_gaussian(out.features, spec.seed);

    const Eigen::MatrixXd A = gaussian(spec.K, spec.rank, derive_key(spec.seed, {kFactorA}));
    const Eigen::MatrixXd B = gaussian(spec.rank, spec.d, derive_key(spec.seed, {kFactorB}));
    Eigen::MatrixXd W = A * B;
    out.signal_var = signal_targets(spec);
    const double pool_var = 1.0 / static_cast<double>(spec.T);
    for (Eigen::Index k = 0; k < W.rows(); ++k) {
        const double raw = W.row(k).squaredNorm() * pool_var;
        W.row(k) *= std::sqrt(out.signal_var(k) / raw);
    }
    out.true_W = W;

    Eigen::MatrixXd pooled(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
    for (std::size_t i = 0; i < spec.n; ++i) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
        for (std::size_t t = 0; t < spec.T; ++t) {
            acc += Eigen::Map<const Eigen::VectorXd>(out.features.token(i, t).data(), static_cast<Eigen::Index>(spec.d));
        }
        pooled.row(static_cast<Eigen::Index>(i)) = acc.transpose() / static_cast<double>(spec.T);
    }
    out.targets = pooled * W.transpose();
    add_noise(out, spec);
    finish(out, spec);
    return out;
}

SynthData gen_concentrated(const SynthSpec& spec) {
    spec.validate();
    if (!spec.signal_patches || spec.signal_patches->empty()) {
        throw Error(ErrorKind::invalid_argument, "gen_concentrated needs a nonempty signal_patches list");
    }
    if (spec.d < spec.rank + 1) throw Error(ErrorKind::invalid_argument, "d must exceed the planted rank");
    const auto& patches = *spec.signal_patches;
    const double S = static_cast<double>(patches.size());
    const double dd = static_cast<double>(spec.d);

    const Eigen::MatrixXd A = gaussian(spec.K, spec.rank, derive_key(spec.seed, {kFactorA}));
    const Eigen::MatrixXd B = gaussian(spec.rank, spec.d, derive_key(spec.seed, {kFactorB}));
    // Orthonormal basis of the row space of B, and a marker direction orthogonal to it.
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(B.transpose()).householderQ() *
                              Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(spec.rank));
    Eigen::VectorXd u = gaussian(spec.d, 1, derive_key(spec.seed, {kMarker})).col(0);
    u -= Q * (Q.transpose() * u);
    u.normalize();

    // Signal patch: a*u + c*Q z + n with z shared across the image's signal patches,
    // a^2 + c^2 rank + d = ratio^2 d.
    const double extra = (spec.signal_norm_ratio * spec.signal_norm_ratio - 1.0) * dd;
    const double a = std::sqrt(0.75 * extra);
    const double c = std::sqrt(0.25 * extra / static_cast<double>(spec.rank));

    SynthData out;
    out.features = FeatureTensor(spec.n, spec.T, spec.d);
    fill_tokens_gaussian(out.features, spec.seed);
    const auto n = static_cast<std::ptrdiff_t>(spec.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        CounterRng rng(derive_key(spec.seed, {kLatent, static_cast<std::uint64_t>(i)}));
        Eigen::VectorXd z(static_cast<Eigen::Index>(spec.rank));
        for (Eigen::Index r = 0; r < z.size(); ++r) z(r) = rng.normal();
        const Eigen::VectorXd add = a * u + c * (Q * z);
        for (auto p : patches) {
            auto tok = out.features.token(static_cast<std::size_t>(i), p);
            for (std::size_t j = 0; j < spec.d; ++j) tok[j] += add(static_cast<Eigen::Index>(j));
        }
    }

    Eigen::MatrixXd W = A * B;
    out.signal_var = signal_targets(spec);
    for (Eigen::Index k = 0; k < W.rows(); ++k) {
        const double raw = c * c * (W.row(k) * Q).squaredNorm() + W.row(k).squaredNorm() / S;
        W.row(k) *= std::sqrt(out.signal_var(k) / raw);
    }
    out.true_W = W;

    Eigen::MatrixXd m(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
    for (std::size_t i = 0; i < spec.n; ++i) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
        for (auto p : patches) {
            acc += Eigen::Map<const Eigen::VectorXd>(out.features.token(i, p).data(), static_cast<Eigen::Index>(spec.d));
        }
        m.row(static_cast<Eigen::Index>(i)) = acc.transpose() / S;
    }
    out.targets = m * W.transpose();
    add_noise(out, spec);
    finish(out, spec);
    return out;
}

SynthData gen_low_variance_target(const SynthSpec& spec) {
    if (!spec.target_stds) throw Error(ErrorKind::invalid_argument, "gen_low_variance_target needs target_stds");
    return spec.signal_patches ? gen_concentrated(spec) : gen_planted_linear(spec);
}

SplitIndices random_split(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "train fraction must lie in (0, 1)");
    }
    CounterRng rng(derive_key(seed, {kSplit}));
    const auto perm = permutation(n, rng);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::filesystem::path write_synth_dataset(const SynthData& data, const std::filesystem::path& dir,
                                          const SynthWriteOptions& options) {
    std::filesystem::create_directories(dir);
    const auto& f = data.features;
    const std::vector<std::size_t> shape{f.n, f.t, f.d};
    if (options.dtype == DType::float32) {
        write_tensor(dir / "features.npy", TensorFile::from_f32(shape, std::vector<float>(f.values.begin(), f.values.end())));
    } else {
        write_tensor(dir / "features.npy", TensorFile::from_f64(shape, f.values));
    }
    write_tensor(dir / "targets.npy", TensorFile::from_matrix(data.targets));

    DatasetManifest m;
    m.model_id = options.model_id;
    m.layer = options.layer;
    m.dataset_name = options.dataset_name;
    m.pooling_hint = "mean";
    m.feature_file = "features.npy";
    m.target_file = "targets.npy";
    for (Eigen::Index k = 0; k < data.targets.cols(); ++k) m.target_names.push_back("y" + std::to_string(k));
    m.target_units = "arb";
    m.split = random_split(f.n, options.train_fraction, options.split_seed);
    m.seed = options.split_seed;
    m.num_special_tokens = 0;
    if (options.pixels) {
        write_tensor(dir / "pixels.npy", TensorFile::from_matrix(*options.pixels));
        m.pixel_file = "pixels.npy";
    }
    const auto path = dir / "manifest.json";
    write_manifest(path, m);
    return path;
}

}  // namespace geoprobe
