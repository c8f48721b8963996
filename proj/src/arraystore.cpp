#include "geoprobe/arraystore.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geoprobe/error.hpp"

namespace geoprobe {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written without byte swapping");

namespace {

constexpr char kMagic[] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleSize = 10;  // magic(6) + version(2) + header_len(2)

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += ", ";
        s += std::to_string(shape[i]);
    }
    if (shape.size() == 1) s += ",";
    s += ")";
    return s;
}

struct Header {
    DType dtype;
    bool fortran_order;
    std::vector<std::size_t> shape;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Value text following 'key': up to the next top-level comma.
std::string_view dict_value(std::string_view dict, std::string_view key) {
    const std::string quoted = "'" + std::string(key) + "'";
    auto pos = dict.find(quoted);
    if (pos == std::string_view::npos) throw Error(ErrorKind::format, "NPY header lacks key " + quoted);
    pos = dict.find(':', pos + quoted.size());
    if (pos == std::string_view::npos) throw Error(ErrorKind::format, "NPY header malformed near " + quoted);
    std::size_t end = pos + 1;
    int depth = 0;
    while (end < dict.size()) {
        const char c = dict[end];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if ((c == ',' && depth == 0) || (c == '}' && depth == 0)) break;
        ++end;
    }
    return trim(dict.substr(pos + 1, end - pos - 1));
}

Header parse_header(std::string_view dict) {
    dict = trim(dict);
    if (dict.empty() || dict.front() != '{' || dict.back() != '}') {
        throw Error(ErrorKind::format, "NPY header is not a dict literal");
    }
    Header h{};
    auto descr = dict_value(dict, "descr");
    if (descr.size() < 2 || (descr.front() != '\'' && descr.front() != '"')) {
        throw Error(ErrorKind::format, "NPY descr is not a string");
    }
    descr = descr.substr(1, descr.size() - 2);
    if (descr == "<f4") {
        h.dtype = DType::float32;
    } else if (descr == "<f8") {
        h.dtype = DType::float64;
    } else {
        throw Error(ErrorKind::dtype, "unsupported dtype '" + std::string(descr) + "' (expected <f4 or <f8)");
    }

    const auto fortran = dict_value(dict, "fortran_order");
    if (fortran == "True") {
        throw Error(ErrorKind::unsupported_layout, "fortran_order arrays are not supported");
    }
    if (fortran != "False") throw Error(ErrorKind::format, "bad fortran_order value");

    auto shape = dict_value(dict, "shape");
    if (shape.size() < 2 || shape.front() != '(' || shape.back() != ')') {
        throw Error(ErrorKind::format, "NPY shape is not a tuple");
    }
    shape = shape.substr(1, shape.size() - 2);
    while (!shape.empty()) {
        const auto comma = shape.find(',');
        const auto item = trim(shape.substr(0, comma));
        if (!item.empty()) {
            std::size_t v = 0;
            for (char c : item) {
                if (c < '0' || c > '9') throw Error(ErrorKind::format, "NPY shape entry is not an integer");
                v = v * 10 + static_cast<std::size_t>(c - '0');
            }
            h.shape.push_back(v);
        }
        if (comma == std::string_view::npos) break;
        shape.remove_prefix(comma + 1);
    }
    return h;
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept { return dtype == DType::float32 ? 4 : 8; }

std::string_view dtype_descr(DType dtype) noexcept { return dtype == DType::float32 ? "<f4" : "<f8"; }

TensorFile TensorFile::from_f64(std::vector<std::size_t> shape, std::vector<double> values) {
    TensorFile t{DType::float64, std::move(shape), std::move(values)};
    t.validate();
    return t;
}

TensorFile TensorFile::from_f32(std::vector<std::size_t> shape, std::vector<float> values) {
    TensorFile t{DType::float32, std::move(shape), std::move(values)};
    t.validate();
    return t;
}

TensorFile TensorFile::from_matrix(const Eigen::MatrixXd& m) {
    std::vector<double> values(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            values[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
        }
    }
    return from_f64({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(values));
}

TensorFile TensorFile::from_vector(const Eigen::VectorXd& v) {
    return from_f64({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

std::size_t TensorFile::element_count() const noexcept {
    return std::visit([](const auto& v) { return v.size(); }, data);
}

std::vector<double> TensorFile::to_f64() const {
    return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data);
}

Eigen::MatrixXd TensorFile::to_matrix() const {
    if (shape.empty() || shape.size() > 2) {
        throw Error(ErrorKind::dimension, "expected a 1-D or 2-D tensor, got rank " + std::to_string(shape.size()));
    }
    const auto rows = static_cast<Eigen::Index>(shape[0]);
    const auto cols = static_cast<Eigen::Index>(shape.size() == 2 ? shape[1] : 1);
    const auto flat = to_f64();
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
    }
    return m;
}

void TensorFile::validate() const {
    const bool holds_f32 = std::holds_alternative<std::vector<float>>(data);
    if (holds_f32 != (dtype == DType::float32)) {
        throw Error(ErrorKind::dtype, "tensor payload type disagrees with declared dtype");
    }
    if (element_count() != product(shape)) {
        throw Error(ErrorKind::byte_length, "shape " + shape_literal(shape) + " needs " +
                                                std::to_string(product(shape)) + " elements, payload has " +
                                                std::to_string(element_count()));
    }
}

std::string encode_tensor(const TensorFile& tensor) {
    tensor.validate();
    std::string header = "{'descr': '" + std::string(dtype_descr(tensor.dtype)) +
                         "', 'fortran_order': False, 'shape': " + shape_literal(tensor.shape) + ", }";
    // Pad with spaces so that preamble + header (incl. trailing newline) is a multiple of 64.
    const std::size_t unpadded = kPreambleSize + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');
    if (header.size() > 0xFFFF) throw Error(ErrorKind::format, "NPY v1.0 header too long");

    std::string out;
    const std::size_t payload = tensor.element_count() * dtype_size(tensor.dtype);
    out.reserve(kPreambleSize + header.size() + payload);
    out.append(kMagic, sizeof(kMagic));
    out.push_back('\x01');
    out.push_back('\x00');
    const auto len = static_cast<std::uint16_t>(header.size());
    out.push_back(static_cast<char>(len & 0xFF));
    out.push_back(static_cast<char>(len >> 8));
    out += header;
    std::visit(
        [&](const auto& v) { out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(v[0])); },
        tensor.data);
    return out;
}

TensorFile decode_tensor(std::string_view bytes) {
    if (bytes.size() < kPreambleSize || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorKind::format, "missing NPY magic sequence");
    }
    if (bytes[6] != '\x01' || bytes[7] != '\x00') {
        throw Error(ErrorKind::format, "only NPY version 1.0 is supported");
    }
    const std::size_t header_len =
        static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < kPreambleSize + header_len) throw Error(ErrorKind::format, "truncated NPY header");
    const Header h = parse_header(bytes.substr(kPreambleSize, header_len));

    const auto payload = bytes.substr(kPreambleSize + header_len);
    const std::size_t count = product(h.shape);
    const std::size_t width = dtype_size(h.dtype);
    if (payload.size() != count * width) {
        throw Error(ErrorKind::byte_length, "shape " + shape_literal(h.shape) + " needs " +
                                                std::to_string(count * width) + " payload bytes, file has " +
                                                std::to_string(payload.size()));
    }
    TensorFile t;
    t.dtype = h.dtype;
    t.shape = h.shape;
    if (h.dtype == DType::float32) {
        std::vector<float> v(count);
        std::memcpy(v.data(), payload.data(), payload.size());
        t.data = std::move(v);
    } else {
        std::vector<double> v(count);
        std::memcpy(v.data(), payload.data(), payload.size());
        t.data = std::move(v);
    }
    return t;
}

TensorFile read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_tensor(ss.str());
}

void write_tensor(const std::filesystem::path& path, const TensorFile& tensor) {
    const std::string bytes = encode_tensor(tensor);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

void validate_split(const SplitIndices& split, std::size_t n) {
    std::set<std::size_t> seen;
    for (auto i : split.train) {
        if (i >= n) throw Error(ErrorKind::split, "train index " + std::to_string(i) + " >= n=" + std::to_string(n));
        if (!seen.insert(i).second) throw Error(ErrorKind::split, "duplicate train index " + std::to_string(i));
    }
    for (auto i : split.test) {
        if (i >= n) throw Error(ErrorKind::split, "test index " + std::to_string(i) + " >= n=" + std::to_string(n));
        if (!seen.insert(i).second) {
            throw Error(ErrorKind::split, "index " + std::to_string(i) + " appears in both train and test");
        }
    }
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
}

namespace {

using nlohmann::json;

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorKind::manifest, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::manifest, std::string("field '") + key + "': " + e.what());
    }
}

std::optional<std::filesystem::path> optional_path(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return std::filesystem::path(j.at(key).get<std::string>());
}

}  // namespace

DatasetManifest manifest_from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::manifest, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::manifest, "manifest must be a JSON object");
    DatasetManifest m;
    m.base_dir = base_dir;
    m.model_id = required<std::string>(j, "model_id");
    m.layer = required<int>(j, "layer");
    if (m.layer < 0) throw Error(ErrorKind::manifest, "layer must be >= 0");
    m.dataset_name = j.value("dataset_name", std::string{});
    m.pooling_hint = j.value("pooling_hint", std::string{});
    m.feature_file = required<std::string>(j, "feature_file");
    m.target_file = required<std::string>(j, "target_file");
    try {
        m.token_mask_file = optional_path(j, "token_mask_file");
        m.attention_entropy_file = optional_path(j, "attention_entropy_file");
        m.pixel_file = optional_path(j, "pixel_file");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::manifest, e.what());
    }
    m.target_names = required<std::vector<std::string>>(j, "target_names");
    m.target_units = j.value("target_units", std::string{});
    const auto split = required<json>(j, "split");
    m.split.train = required<std::vector<std::size_t>>(split, "train_indices");
    m.split.test = required<std::vector<std::size_t>>(split, "test_indices");
    m.seed = j.value("seed", std::uint64_t{0});
    m.num_special_tokens = j.value("num_special_tokens", std::size_t{0});
    return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["model_id"] = m.model_id;
    j["layer"] = m.layer;
    j["dataset_name"] = m.dataset_name;
    j["pooling_hint"] = m.pooling_hint;
    j["feature_file"] = m.feature_file.generic_string();
    j["target_file"] = m.target_file.generic_string();
    if (m.token_mask_file) j["token_mask_file"] = m.token_mask_file->generic_string();
    if (m.attention_entropy_file) j["attention_entropy_file"] = m.attention_entropy_file->generic_string();
    if (m.pixel_file) j["pixel_file"] = m.pixel_file->generic_string();
    j["target_names"] = m.target_names;
    j["target_units"] = m.target_units;
    j["split"] = {{"train_indices", m.split.train}, {"test_indices", m.split.test}};
    j["seed"] = m.seed;
    j["num_special_tokens"] = m.num_special_tokens;
    return j.dump(2) + "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str(), path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << manifest_to_json(manifest);
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
    return load_dataset(read_manifest(manifest_path));
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
    LoadedDataset out;
    out.manifest = manifest;

    const TensorFile feat = read_tensor(manifest.resolve(manifest.feature_file));
    FeatureSet& fs = out.features;
    fs.model_id = manifest.model_id;
    fs.layer = manifest.layer;
    if (feat.shape.size() == 3) {
        fs.tokens = FeatureTensor(feat.shape[0], feat.shape[1], feat.shape[2]);
    } else if (feat.shape.size() == 2) {
        fs.tokens = FeatureTensor(feat.shape[0], 1, feat.shape[1]);
        fs.prepooled = true;
    } else {
        throw Error(ErrorKind::manifest, "feature tensor must be N x T x d or N x d");
    }
    fs.tokens.values = feat.to_f64();
    const std::size_t n = fs.tokens.n;

    const TensorFile tgt = read_tensor(manifest.resolve(manifest.target_file));
    TargetSet& ts = out.targets;
    ts.values = tgt.to_matrix();
    if (static_cast<std::size_t>(ts.values.rows()) != n) {
        throw Error(ErrorKind::manifest, "target rows " + std::to_string(ts.values.rows()) +
                                             " != feature rows " + std::to_string(n));
    }
    if (static_cast<std::size_t>(ts.values.cols()) != manifest.target_names.size()) {
        throw Error(ErrorKind::manifest, "manifest lists " + std::to_string(manifest.target_names.size()) +
                                             " target names but target tensor has K=" +
                                             std::to_string(ts.values.cols()));
    }
    ts.names = manifest.target_names;
    ts.units = manifest.target_units;
    validate_split(manifest.split, n);
    ts.split = manifest.split;

    if (manifest.token_mask_file) {
        const auto mask = read_tensor(manifest.resolve(*manifest.token_mask_file)).to_f64();
        if (mask.size() != fs.tokens.t) {
            throw Error(ErrorKind::manifest, "token mask length " + std::to_string(mask.size()) +
                                                 " != T=" + std::to_string(fs.tokens.t));
        }
        std::vector<std::uint8_t> bits(mask.size());
        std::transform(mask.begin(), mask.end(), bits.begin(), [](double v) { return v != 0.0 ? 1 : 0; });
        fs.mask = TokenMask(std::move(bits));
    } else if (fs.prepooled) {
        fs.mask = TokenMask(1, true);
    } else {
        fs.mask = TokenMask::excluding_leading(fs.tokens.t, manifest.num_special_tokens);
    }

    if (manifest.attention_entropy_file) {
        fs.attention_entropy = read_tensor(manifest.resolve(*manifest.attention_entropy_file)).to_matrix();
        if (static_cast<std::size_t>(fs.attention_entropy->rows()) != n) {
            throw Error(ErrorKind::manifest, "attention entropy rows != N");
        }
    }
    if (manifest.pixel_file) {
        const TensorFile px = read_tensor(manifest.resolve(*manifest.pixel_file));
        if (px.shape.empty() || px.shape[0] != n) throw Error(ErrorKind::manifest, "pixel tensor rows != N");
        const std::size_t width = px.element_count() / n;
        const auto flat = px.to_f64();
        Eigen::MatrixXd pixels(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < width; ++j) {
                pixels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * width + j];
            }
        }
        fs.pixels = std::move(pixels);
    }
    return out;
}

}  // namespace geoprobe
