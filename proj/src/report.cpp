#include "geoprobe/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "geoprobe/error.hpp"

namespace geoprobe::report {

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json opt_list(const std::vector<std::optional<double>>& values) {
    json a = json::array();
    for (const auto& v : values) a.push_back(opt(v));
    return a;
}

const char* mode_name(AblationMode m) { return m == AblationMode::top_norm ? "top_norm" : "random"; }

json ablation_json(const AblationResult& r) {
    return {{"mode", mode_name(r.mode)},
            {"k", r.k},
            {"baseline_r2", num(r.baseline_r2)},
            {"ablated_r2", num(r.ablated_r2)},
            {"delta", num(r.delta)}};
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
    std::size_t b = cell.find_first_not_of(" \t");
    std::size_t e = cell.find_last_not_of(" \t");
    const std::string s = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
    if (s == "nan" || s == "NaN") return std::nan("");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorKind::format, "CSV row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) +
                                           ": not a number: '" + cell + "'");
    }
    return v;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

json to_json(const EvalReport& r) {
    return {{"r2_per_target", opt_list(r.r2_per_target)},
            {"r2_uniform_mean", opt(r.r2_uniform_mean)},
            {"mae", num(r.mae)},
            {"n_test", r.n_test},
            {"target_names", r.target_names}};
}

json to_json(const SweepResult& r) {
    json cells = json::array();
    for (const auto& c : r.grid) {
        json cell = {{"rank", c.rank},
                     {"alpha", c.alpha},
                     {"holdout_r2_uniform", opt(c.holdout_r2_uniform)},
                     {"mae", opt(c.mae)}};
        if (!c.error.empty()) cell["error"] = c.error;
        cells.push_back(std::move(cell));
    }
    return {{"grid", std::move(cells)},
            {"best_rank", r.best_rank},
            {"best_alpha", r.best_alpha},
            {"best_report", to_json(r.best_report)}};
}

json to_json(const TostResult& r) {
    return {{"mean_diff", num(r.mean_diff)}, {"p_lower", num(r.p_lower)}, {"p_upper", num(r.p_upper)},
            {"p_tost", num(r.p_tost)},       {"equivalent_at", r.equivalent_at}, {"df", r.df},
            {"equivalent", r.equivalent}};
}

json to_json(const FriedmanResult& r) {
    return {{"chi2", num(r.chi2)}, {"df", r.df}, {"p", num(r.p)}, {"mean_ranks", r.mean_ranks}};
}

json to_json(const BootstrapCI& r) {
    return {{"point", num(r.point)}, {"lower", num(r.lower)}, {"upper", num(r.upper)},
            {"level", r.level},      {"B", r.B},              {"z0", num(r.z0)},
            {"accel", num(r.accel)}, {"excluded", r.excluded}};
}

json to_json(const SpearmanResult& r) { return {{"rho", opt(r.rho)}, {"p", opt(r.p)}, {"n", r.n}}; }

json to_json(const CkaMatrix& m) { return {{"models", m.models}, {"values", matrix_json(m.values)}}; }

json to_json(const CkaGapAnalysis& g, const CkaMatrix& m) {
    json pairs = json::array();
    for (const auto& p : g.pairs) {
        pairs.push_back({{"model_i", m.models[p.i]},
                         {"model_j", m.models[p.j]},
                         {"cka", num(p.cka)},
                         {"abs_delta_r2", num(p.abs_delta_r2)}});
    }
    return {{"pairs", std::move(pairs)}, {"rho", opt(g.rho)}, {"p", opt(g.p)}};
}

json to_json(const LayerCurve& c) {
    json j = {{"layers", c.layers}, {"r2", c.r2}, {"best_layer", c.best_layer}};
    if (!c.best_hp.empty()) {
        json hp = json::array();
        for (const auto& [rank, alpha] : c.best_hp) hp.push_back({{"rank", rank}, {"alpha", alpha}});
        j["best_hp"] = std::move(hp);
    }
    return j;
}

json to_json(const CvResult& r) {
    json hp = json::array();
    for (const auto& [rank, alpha] : r.chosen_hp_per_fold) hp.push_back({{"rank", rank}, {"alpha", alpha}});
    return {{"per_fold_r2", opt_list(r.per_fold_r2)},
            {"mean", num(r.mean)},
            {"chosen_hp_per_fold", std::move(hp)},
            {"fold_errors", r.fold_errors}};
}

json to_json(const EquivalenceResult& r, const FoldTable& table) {
    json order = json::array();
    for (auto i : r.order) order.push_back(table.model_names[i]);
    json pairs = json::array();
    for (const auto& p : r.pairs) {
        json e = to_json(p.tost);
        e["model_i"] = table.model_names[p.i];
        e["model_j"] = table.model_names[p.j];
        e["p_holm"] = num(p.p_holm);
        pairs.push_back(std::move(e));
    }
    return {{"cluster", r.cluster}, {"order", std::move(order)}, {"pairs", std::move(pairs)}};
}

json to_json(const AblationPair& r) {
    return {{"top_norm", ablation_json(r.top_norm)}, {"random", ablation_json(r.random)}};
}

json to_json(const std::vector<HeadResult>& heads) {
    json a = json::array();
    for (const auto& h : heads) {
        a.push_back({{"head", h.head},
                     {"report", to_json(h.report)},
                     {"best_rank", h.best_rank},
                     {"best_alpha", h.best_alpha}});
    }
    return a;
}

json to_json(const HeadEntropyCorrelation& h) {
    json j = {{"rho", matrix_json(h.rho)}, {"max_abs_rho", opt(h.max_abs_rho)}};
    if (h.max_abs_rho) {
        j["argmax_head"] = h.argmax_head;
        j["argmax_target"] = h.argmax_target;
    }
    return j;
}

json to_json(const ValidityReport& r) {
    json j = {{"baseline", to_json(r.baseline)},
              {"shuffled_targets", to_json(r.shuffled_targets)},
              {"random_features", to_json(r.random_features)}};
    j["pixel_baseline"] = r.pixel_baseline ? to_json(*r.pixel_baseline) : json(nullptr);
    return j;
}

std::string sweep_csv(const SweepResult& r) {
    std::string s = "rank,alpha,holdout_r2_uniform,mae,error\n";
    for (const auto& c : r.grid) {
        s += std::to_string(c.rank) + ',' + format_double(c.alpha) + ',' + format_optional(c.holdout_r2_uniform) + ',' +
             format_optional(c.mae) + ',' + csv_field(c.error) + '\n';
    }
    return s;
}

std::string eval_csv(const EvalReport& r) {
    std::string s = "target,r2\n";
    for (std::size_t k = 0; k < r.r2_per_target.size(); ++k) {
        const std::string name = k < r.target_names.size() ? r.target_names[k] : "target_" + std::to_string(k);
        s += csv_field(name) + ',' + format_optional(r.r2_per_target[k]) + '\n';
    }
    s += "uniform_mean," + format_optional(r.r2_uniform_mean) + '\n';
    return s;
}

std::string cka_csv(const CkaMatrix& m) {
    std::string s = "model";
    for (const auto& name : m.models) s += ',' + csv_field(name);
    s += '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        s += csv_field(m.models[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) s += ',' + format_double(m.values(i, j));
        s += '\n';
    }
    return s;
}

std::string cka_pairs_csv(const CkaGapAnalysis& g, const CkaMatrix& m) {
    std::string s = "model_i,model_j,cka,abs_delta_r2\n";
    for (const auto& p : g.pairs) {
        s += csv_field(m.models[p.i]) + ',' + csv_field(m.models[p.j]) + ',' + format_double(p.cka) + ',' +
             format_double(p.abs_delta_r2) + '\n';
    }
    return s;
}

std::string layer_csv(const LayerCurve& c) {
    std::string s = "layer,r2,best_rank,best_alpha\n";
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        s += std::to_string(c.layers[i]) + ',' + format_double(c.r2[i]) + ',';
        if (i < c.best_hp.size()) s += std::to_string(c.best_hp[i].first) + ',' + format_double(c.best_hp[i].second);
        else s += ',';
        s += '\n';
    }
    return s;
}

std::string cv_csv(const CvResult& r) {
    std::string s = "fold,r2,rank,alpha,error\n";
    for (std::size_t f = 0; f < r.per_fold_r2.size(); ++f) {
        s += std::to_string(f) + ',' + format_optional(r.per_fold_r2[f]) + ',' +
             std::to_string(r.chosen_hp_per_fold[f].first) + ',' + format_double(r.chosen_hp_per_fold[f].second) +
             ',' + csv_field(r.fold_errors[f]) + '\n';
    }
    return s;
}

std::string tost_csv(const EquivalenceResult& r, const FoldTable& table) {
    std::string s = "model_i,model_j,mean_diff,p_tost,p_holm,equivalent\n";
    for (const auto& p : r.pairs) {
        s += csv_field(table.model_names[p.i]) + ',' + csv_field(table.model_names[p.j]) + ',' +
             format_double(p.tost.mean_diff) + ',' + format_double(p.tost.p_tost) + ',' + format_double(p.p_holm) +
             ',' + (p.p_holm < 0.05 ? "1" : "0") + '\n';
    }
    return s;
}

std::string ablation_csv(const AblationPair& r) {
    std::string s = "mode,k,baseline_r2,ablated_r2,delta\n";
    for (const auto* a : {&r.top_norm, &r.random}) {
        s += std::string(mode_name(a->mode)) + ',' + std::to_string(a->k) + ',' + format_double(a->baseline_r2) + ',' +
             format_double(a->ablated_r2) + ',' + format_double(a->delta) + '\n';
    }
    return s;
}

std::string heads_csv(const std::vector<HeadResult>& heads) {
    std::string s = "head,r2_uniform_mean,mae,best_rank,best_alpha\n";
    for (const auto& h : heads) {
        s += std::to_string(h.head) + ',' + format_optional(h.report.r2_uniform_mean) + ',' +
             format_double(h.report.mae) + ',' + std::to_string(h.best_rank) + ',' + format_double(h.best_alpha) +
             '\n';
    }
    return s;
}

std::string validity_csv(const ValidityReport& r) {
    std::string s = "control,r2_uniform_mean,mae\n";
    auto row = [&](const char* name, const EvalReport& e) {
        s += std::string(name) + ',' + format_optional(e.r2_uniform_mean) + ',' + format_double(e.mae) + '\n';
    };
    row("baseline", r.baseline);
    row("shuffled_targets", r.shuffled_targets);
    row("random_features", r.random_features);
    if (r.pixel_baseline) row("pixel_baseline", *r.pixel_baseline);
    return s;
}

std::string bootstrap_csv(const std::string& model, const BootstrapCI& ci) {
    return "model,point,lower,upper\n" + csv_field(model) + ',' + format_double(ci.point) + ',' +
           format_double(ci.lower) + ',' + format_double(ci.upper) + '\n';
}

std::string dump(const json& j) { return j.dump(2) + '\n'; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

FoldTable read_fold_table(const std::filesystem::path& path) { return parse_fold_table(read_text(path)); }

FoldTable parse_fold_table(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2) throw Error(ErrorKind::format, "fold table needs a header and at least one model row");
    const std::size_t F = rows.front().size() - 1;
    if (F == 0) throw Error(ErrorKind::format, "fold table has no fold columns");
    FoldTable t;
    t.values.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(F));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != F + 1) {
            throw Error(ErrorKind::format, "fold table row " + std::to_string(r + 1) + " has " +
                                               std::to_string(rows[r].size()) + " cells, expected " +
                                               std::to_string(F + 1));
        }
        t.model_names.push_back(rows[r][0]);
        for (std::size_t f = 0; f < F; ++f) {
            t.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(f)) = parse_number(rows[r][f + 1], r, f + 1);
        }
    }
    t.validate();
    return t;
}

CkaMatrix parse_cka_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2) throw Error(ErrorKind::format, "CKA matrix CSV needs a header and at least one row");
    const std::size_t M = rows.front().size() - 1;
    if (rows.size() != M + 1) throw Error(ErrorKind::format, "CKA matrix CSV is not square");
    CkaMatrix m;
    m.models.assign(rows.front().begin() + 1, rows.front().end());
    m.values.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    for (std::size_t r = 1; r <= M; ++r) {
        if (rows[r].size() != M + 1) throw Error(ErrorKind::format, "CKA matrix row " + std::to_string(r + 1) + " has the wrong width");
        if (rows[r][0] != m.models[r - 1]) {
            throw Error(ErrorKind::format, "CKA matrix row label '" + rows[r][0] + "' does not match column '" +
                                               m.models[r - 1] + "'");
        }
        for (std::size_t c = 0; c < M; ++c) {
            m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = parse_number(rows[r][c + 1], r, c + 1);
        }
    }
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double a = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double b = m.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (std::isnan(a) && std::isnan(b)) continue;
            if (std::abs(a - b) > 1e-9) throw Error(ErrorKind::format, "CKA matrix is not symmetric");
        }
    }
    return m;
}

LayerCurve parse_layer_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2) throw Error(ErrorKind::format, "layer CSV needs a header and at least one row");
    std::vector<int> layers;
    std::vector<double> r2;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 2) throw Error(ErrorKind::format, "layer CSV row " + std::to_string(r + 1) + " needs layer,r2");
        const double layer = parse_number(rows[r][0], r, 0);
        if (layer != std::floor(layer)) throw Error(ErrorKind::format, "layer index must be an integer");
        layers.push_back(static_cast<int>(layer));
        r2.push_back(parse_number(rows[r][1], r, 1));
    }
    return best_layer_curve(std::move(layers), std::move(r2));
}

}  // namespace geoprobe::report
