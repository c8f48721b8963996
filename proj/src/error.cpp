#include "geoprobe/error.hpp"

namespace geoprobe {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::format: return "format";
        case ErrorKind::unsupported_layout: return "unsupported-layout";
        case ErrorKind::dtype: return "dtype";
        case ErrorKind::byte_length: return "byte-length";
        case ErrorKind::io: return "io";
        case ErrorKind::manifest: return "manifest";
        case ErrorKind::split: return "split";
        case ErrorKind::empty_pool: return "empty-pool";
        case ErrorKind::ablation: return "ablation";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::singular: return "singularity";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::training: return "training";
        case ErrorKind::bootstrap: return "bootstrap";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::experiment: return "experiment";
        case ErrorKind::head: return "head";
        case ErrorKind::alignment: return "alignment";
        case ErrorKind::invalid_argument: return "invalid-argument";
    }
    return "unknown";
}

}  // namespace geoprobe
