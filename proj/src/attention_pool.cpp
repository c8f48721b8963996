#include "geoprobe/probes.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "geoprobe/error.hpp"
#include "geoprobe/pooling.hpp"
#include "geoprobe/rng.hpp"

namespace geoprobe {

namespace {

// Softmax weights over included tokens of image i; excluded tokens get 0.
void attention_weights(const Eigen::VectorXd& query, double scale, const FeatureTensor& f, const MaskGrid& masks,
                       std::size_t i, std::vector<double>& w) {
    w.assign(f.t, 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t tok = 0; tok < f.t; ++tok) {
        if (!masks.included(i, tok)) continue;
        const auto h = f.token(i, tok);
        double s = 0.0;
        for (std::size_t j = 0; j < f.d; ++j) s += query(static_cast<Eigen::Index>(j)) * h[j];
        w[tok] = s * scale;
        max_logit = std::max(max_logit, w[tok]);
    }
    double z = 0.0;
    for (std::size_t tok = 0; tok < f.t; ++tok) {
        if (!masks.included(i, tok)) continue;
        w[tok] = std::exp(w[tok] - max_logit);
        z += w[tok];
    }
    for (std::size_t tok = 0; tok < f.t; ++tok) w[tok] = masks.included(i, tok) ? w[tok] / z : 0.0;
}

void pooled_row(const std::vector<double>& w, const FeatureTensor& f, std::size_t i, Eigen::Ref<Eigen::VectorXd> p) {
    p.setZero();
    for (std::size_t tok = 0; tok < f.t; ++tok) {
        if (w[tok] == 0.0) continue;
        const auto h = f.token(i, tok);
        for (std::size_t j = 0; j < f.d; ++j) p(static_cast<Eigen::Index>(j)) += w[tok] * h[j];
    }
}

double logit_scale(double temperature, std::size_t d) { return 1.0 / (temperature * std::sqrt(static_cast<double>(d))); }

void check_inputs(const FeatureTensor& f, const MaskGrid& masks, const Eigen::MatrixXd& Y) {
    if (masks.images() != f.n || masks.tokens() != f.t) throw Error(ErrorKind::dimension, "mask grid does not match features");
    if (static_cast<std::size_t>(Y.rows()) != f.n) throw Error(ErrorKind::dimension, "target rows do not match features");
    for (std::size_t i = 0; i < f.n; ++i) {
        if (masks.count(i) == 0) throw Error(ErrorKind::empty_pool, "image " + std::to_string(i) + " has no tokens");
    }
}

double mse(const AttnParams& params, double temperature, const FeatureTensor& f, const MaskGrid& masks,
           const Eigen::MatrixXd& Y) {
    const Eigen::MatrixXd P = attention_pool(params.query, temperature, f, masks);
    const Eigen::MatrixXd Yhat = (P * params.W.transpose()).rowwise() + params.b.transpose();
    return (Yhat - Y).squaredNorm() / static_cast<double>(Y.size());
}

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int step = 0;
    AttnParams m, v;

    Adam(double lr_, const AttnParams& shape) : lr(lr_) {
        m = {Eigen::VectorXd::Zero(shape.query.size()), Eigen::MatrixXd::Zero(shape.W.rows(), shape.W.cols()),
             Eigen::VectorXd::Zero(shape.b.size())};
        v = m;
    }

    template <typename P, typename G>
    void update(P& param, const G& grad, P& m1, P& m2, double c1, double c2) const {
        m1 = beta1 * m1 + (1.0 - beta1) * grad;
        m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    }

    void apply(AttnParams& p, const AttnLossGrad& g) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, step);
        const double c2 = 1.0 - std::pow(beta2, step);
        update(p.query, g.d_query, m.query, v.query, c1, c2);
        update(p.W, g.d_W, m.W, v.W, c1, c2);
        update(p.b, g.d_b, m.b, v.b, c1, c2);
    }
};

AttnProbe train(const FeatureTensor& f, const MaskGrid& masks, const Eigen::MatrixXd& Y, const FeatureTensor& mon_f,
                const MaskGrid& mon_masks, const Eigen::MatrixXd& mon_Y, const AttnConfig& cfg) {
    if (f.t < 2) throw Error(ErrorKind::invalid_argument, "attention pooling needs T >= 2 tokens");
    if (!(cfg.temperature > 0.0)) throw Error(ErrorKind::invalid_argument, "temperature must be positive");
    if (cfg.batch_size == 0) throw Error(ErrorKind::invalid_argument, "batch size must be positive");
    check_inputs(f, masks, Y);
    check_inputs(mon_f, mon_masks, mon_Y);

    AttnProbe probe = attention_init(f, masks, Y, cfg);
    AttnParams params = probe.params;
    AttnParams best = params;
    double best_val = mse(params, cfg.temperature, mon_f, mon_masks, mon_Y);
    probe.train_log.push_back({0, mse(params, cfg.temperature, f, masks, Y), best_val});
    probe.best_epoch = 0;

    Adam opt(cfg.lr, params);
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        CounterRng rng(derive_key(cfg.seed, {0xA77E, static_cast<std::uint64_t>(epoch)}));
        const auto order = permutation(f.n, rng);
        for (std::size_t start = 0; start < f.n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, f.n - start);
            const auto g = attention_loss_grad(params, cfg.temperature, f, masks, Y,
                                               std::span<const std::size_t>(order.data() + start, len));
            if (!std::isfinite(g.loss)) {
                throw Error(ErrorKind::training, "non-finite loss at epoch " + std::to_string(epoch));
            }
            opt.apply(params, g);
        }
        const double train_loss = mse(params, cfg.temperature, f, masks, Y);
        const double val_loss = mse(params, cfg.temperature, mon_f, mon_masks, mon_Y);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw Error(ErrorKind::training, "non-finite loss at epoch " + std::to_string(epoch));
        }
        probe.train_log.push_back({epoch, train_loss, val_loss});
        if (val_loss < best_val) {
            best_val = val_loss;
            best = params;
            probe.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    probe.params = std::move(best);
    return probe;
}

}  // namespace

Eigen::MatrixXd attention_pool(const Eigen::VectorXd& query, double temperature, const FeatureTensor& features,
                               const MaskGrid& masks) {
    if (static_cast<std::size_t>(query.size()) != features.d) throw Error(ErrorKind::dimension, "query length != d");
    if (masks.images() != features.n || masks.tokens() != features.t) {
        throw Error(ErrorKind::dimension, "mask grid does not match features");
    }
    const double scale = logit_scale(temperature, features.d);
    Eigen::MatrixXd P(static_cast<Eigen::Index>(features.d), static_cast<Eigen::Index>(features.n));
    const auto n = static_cast<std::ptrdiff_t>(features.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        std::vector<double> w;
        attention_weights(query, scale, features, masks, static_cast<std::size_t>(i), w);
        pooled_row(w, features, static_cast<std::size_t>(i), P.col(i));
    }
    return P.transpose();
}

Eigen::MatrixXd predict(const AttnProbe& probe, const FeatureTensor& features, const MaskGrid& masks) {
    const Eigen::MatrixXd P = attention_pool(probe.params.query, probe.temperature, features, masks);
    return (P * probe.params.W.transpose()).rowwise() + probe.params.b.transpose();
}

AttnLossGrad attention_loss_grad(const AttnParams& params, double temperature, const FeatureTensor& f,
                                 const MaskGrid& masks, const Eigen::MatrixXd& Y, std::span<const std::size_t> rows) {
    const Eigen::Index d = static_cast<Eigen::Index>(f.d);
    const Eigen::Index K = params.W.rows();
    const double scale = logit_scale(temperature, f.d);
    const double norm = 1.0 / static_cast<double>(rows.size() * static_cast<std::size_t>(K));

    AttnLossGrad g{0.0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(K, d), Eigen::VectorXd::Zero(K)};
    std::vector<double> w;
    Eigen::VectorXd p(d);
    for (std::size_t i : rows) {
        attention_weights(params.query, scale, f, masks, i, w);
        pooled_row(w, f, i, p);
        const Eigen::VectorXd resid = params.W * p + params.b - Y.row(static_cast<Eigen::Index>(i)).transpose();
        g.loss += resid.squaredNorm() * norm;
        const Eigen::VectorXd dy = 2.0 * norm * resid;
        g.d_W.noalias() += dy * p.transpose();
        g.d_b += dy;
        const Eigen::VectorXd dp = params.W.transpose() * dy;
        const double p_dp = p.dot(dp);
        for (std::size_t tok = 0; tok < f.t; ++tok) {
            if (w[tok] == 0.0) continue;
            const Eigen::Map<const Eigen::VectorXd> h(f.token(i, tok).data(), d);
            const double ds = w[tok] * (h.dot(dp) - p_dp);
            g.d_query += (ds * scale) * h;
        }
    }
    return g;
}

AttnProbe attention_init(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                         const AttnConfig& config) {
    check_inputs(features, masks, Y);
    const LinearProbe head = fit_ridge(mean_pool(features, masks), Y, config.init_alpha);
    AttnProbe probe;
    probe.temperature = config.temperature;
    probe.params = {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.d)), head.W, head.b};
    return probe;
}

AttnProbe fit_attention_pool(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                             const AttnConfig& config) {
    if (!(config.val_fraction > 0.0 && config.val_fraction <= 0.5)) {
        throw Error(ErrorKind::invalid_argument, "val_fraction must lie in (0, 0.5]");
    }
    check_inputs(features, masks, Y);
    CounterRng rng(derive_key(config.seed, {0x5A11}));
    const auto perm = permutation(features.n, rng);
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.val_fraction * static_cast<double>(features.n))));
    if (n_val + 2 > features.n) throw Error(ErrorKind::insufficient_data, "too few samples for a validation split");
    std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());

    auto rows_of = [&](const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), Y.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = Y.row(static_cast<Eigen::Index>(idx[r]));
        return out;
    };
    return train(features.select_images(tr), masks.select_images(tr), rows_of(tr), features.select_images(val),
                 masks.select_images(val), rows_of(val), config);
}

AttnProbe fit_attention_pool_monitored(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                                       const FeatureTensor& monitor_features, const MaskGrid& monitor_masks,
                                       const Eigen::MatrixXd& monitor_Y, const AttnConfig& config) {
    return train(features, masks, Y, monitor_features, monitor_masks, monitor_Y, config);
}

}  // namespace geoprobe
