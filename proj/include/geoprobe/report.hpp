#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoprobe/experiments.hpp"
#include "geoprobe/metrics.hpp"
#include "geoprobe/probes.hpp"
#include "geoprobe/similarity.hpp"
#include "geoprobe/stats.hpp"

// JSON and flat CSV renderings of every result type. Output is a pure
// function of the values, so reruns with the same seeds are byte-identical.
namespace geoprobe::report {

using nlohmann::json;

// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);
// Empty cell for nullopt.
std::string format_optional(const std::optional<double>& v);
// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

json to_json(const EvalReport& r);
json to_json(const SweepResult& r);
json to_json(const TostResult& r);
json to_json(const FriedmanResult& r);
json to_json(const BootstrapCI& r);
json to_json(const SpearmanResult& r);
json to_json(const CkaMatrix& m);
json to_json(const CkaGapAnalysis& g, const CkaMatrix& m);
json to_json(const LayerCurve& c);
json to_json(const CvResult& r);
json to_json(const EquivalenceResult& r, const FoldTable& table);
json to_json(const AblationPair& r);
json to_json(const std::vector<HeadResult>& heads);
json to_json(const HeadEntropyCorrelation& h);
json to_json(const ValidityReport& r);

// rank,alpha,holdout_r2_uniform,mae,error
std::string sweep_csv(const SweepResult& r);
// target,r2
std::string eval_csv(const EvalReport& r);
// model,<names...> then one row per model
std::string cka_csv(const CkaMatrix& m);
// model_i,model_j,cka,abs_delta_r2
std::string cka_pairs_csv(const CkaGapAnalysis& g, const CkaMatrix& m);
// layer,r2,best_rank,best_alpha
std::string layer_csv(const LayerCurve& c);
// fold,r2,rank,alpha,error
std::string cv_csv(const CvResult& r);
// model_i,model_j,mean_diff,p_tost,p_holm,equivalent
std::string tost_csv(const EquivalenceResult& r, const FoldTable& table);
// mode,k,baseline_r2,ablated_r2,delta
std::string ablation_csv(const AblationPair& r);
// head,r2_uniform_mean,mae,best_rank,best_alpha
std::string heads_csv(const std::vector<HeadResult>& heads);
// control,r2_uniform_mean,mae
std::string validity_csv(const ValidityReport& r);
// model,point,lower,upper
std::string bootstrap_csv(const std::string& model, const BootstrapCI& ci);

// Pretty JSON with a trailing newline.
std::string dump(const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// CSV with a `model` column followed by one numeric column per fold.
FoldTable read_fold_table(const std::filesystem::path& path);
FoldTable parse_fold_table(const std::string& text);
// Square matrix CSV in the cka_csv layout.
CkaMatrix parse_cka_csv(const std::string& text);
// Precomputed layer curve: header then `layer,r2` rows.
LayerCurve parse_layer_csv(const std::string& text);

}  // namespace geoprobe::report
