#pragma once

// NPY v1.0 tensor files and JSON dataset manifests: the file boundary
// between the feature extractor and the probing toolkit.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/features.hpp"

namespace geoprobe {

enum class DType { float32, float64 };

std::size_t dtype_size(DType dtype) noexcept;
std::string_view dtype_descr(DType dtype) noexcept;

struct TensorFile {
    DType dtype = DType::float64;
    std::vector<std::size_t> shape;
    std::variant<std::vector<float>, std::vector<double>> data;

    static TensorFile from_f64(std::vector<std::size_t> shape, std::vector<double> values);
    static TensorFile from_f32(std::vector<std::size_t> shape, std::vector<float> values);
    // Column-major Eigen matrix stored as a row-major (rows, cols) tensor.
    static TensorFile from_matrix(const Eigen::MatrixXd& m);
    static TensorFile from_vector(const Eigen::VectorXd& v);

    std::size_t element_count() const noexcept;
    // Widened copy; float32 values convert exactly.
    std::vector<double> to_f64() const;
    // Requires a 1-D or 2-D shape; 1-D becomes a column.
    Eigen::MatrixXd to_matrix() const;

    // Throws if the element count or byte length disagrees with the shape.
    void validate() const;

    friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

// Full NPY byte image of a tensor.
std::string encode_tensor(const TensorFile& tensor);
TensorFile decode_tensor(std::string_view bytes);

TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const TensorFile& tensor);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Throws split error on overlap or out-of-range indices.
void validate_split(const SplitIndices& split, std::size_t n);

struct DatasetManifest {
    std::string model_id;
    int layer = 0;
    std::string dataset_name;
    std::string pooling_hint;
    std::filesystem::path feature_file;
    std::filesystem::path target_file;
    std::optional<std::filesystem::path> token_mask_file;
    std::optional<std::filesystem::path> attention_entropy_file;
    // Flattened pre-resized images for the pixel-baseline control.
    std::optional<std::filesystem::path> pixel_file;
    std::vector<std::string> target_names;
    std::string target_units;
    SplitIndices split;
    std::uint64_t seed = 0;
    std::size_t num_special_tokens = 0;

    // Directory that relative file paths resolve against.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
// Paths are written as given (relative paths stay relative to the manifest).
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view text, const std::filesystem::path& base_dir);

struct FeatureSet {
    std::string model_id;
    int layer = 0;
    FeatureTensor tokens;
    TokenMask mask;
    bool prepooled = false;
    std::optional<Eigen::MatrixXd> attention_entropy;  // n x heads
    std::optional<Eigen::MatrixXd> pixels;             // n x p
};

struct TargetSet {
    Eigen::MatrixXd values;  // n x K
    std::vector<std::string> names;
    std::string units;
    SplitIndices split;
};

struct LoadedDataset {
    DatasetManifest manifest;
    FeatureSet features;
    TargetSet targets;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);
LoadedDataset load_dataset(const DatasetManifest& manifest);

}  // namespace geoprobe
