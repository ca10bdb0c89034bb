#include "geosteer/model.hpp"
#include "geosteer/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace geosteer {

namespace {

using nlohmann::json;

void validate(const std::vector<std::string>& labels, const MatrixRM& gamma) {
    if (gamma.rows() < 2) {
        throw Error(errc::vocabulary_too_small,
                    "model needs at least 2 items, got " +
                        std::to_string(gamma.rows()));
    }
    if (gamma.cols() < 1) {
        throw Error(errc::malformed_header, "embedding dimension must be >= 1");
    }
    if (static_cast<Eigen::Index>(labels.size()) != gamma.rows()) {
        throw Error(errc::malformed_header,
                    "label count does not match row count");
    }
    if (!gamma.allFinite()) {
        throw Error(errc::non_finite, "gamma contains non-finite entries");
    }
    std::unordered_set<std::string> seen;
    for (const auto& label : labels) {
        if (!seen.insert(label).second) {
            throw Error(errc::duplicate_labels, "duplicate label '" + label + "'");
        }
    }
}

uint64_t to_le_bits(double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return bits;
}

double from_le_bits(uint64_t bits) {
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
}

json parse_header(const std::string& line) {
    json header = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (header.is_discarded() || !header.is_object()) {
        throw Error(errc::malformed_header, "header line is not a JSON object");
    }
    if (!header.contains("version") || header["version"] != 1) {
        throw Error(errc::malformed_header, "unsupported SGM version");
    }
    for (const char* key : {"V", "d", "labels"}) {
        if (!header.contains(key)) {
            throw Error(errc::malformed_header,
                        std::string("missing header field '") + key + "'");
        }
    }
    if (!header["V"].is_number_integer() || !header["d"].is_number_integer() ||
        !header["labels"].is_array()) {
        throw Error(errc::malformed_header, "header field has wrong type");
    }
    return header;
}

std::vector<std::string> read_labels(const json& header) {
    std::vector<std::string> labels;
    for (const auto& entry : header["labels"]) {
        if (!entry.is_string()) {
            throw Error(errc::malformed_header, "labels must be strings");
        }
        labels.push_back(entry.get<std::string>());
    }
    return labels;
}

} // namespace

const char* errc_name(errc code) {
    switch (code) {
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::malformed_header: return "MalformedHeader";
    case errc::payload_truncated: return "PayloadTruncated";
    case errc::vocabulary_too_small: return "VocabularyTooSmall";
    case errc::duplicate_labels: return "DuplicateLabels";
    case errc::non_finite: return "NonFinite";
    case errc::io_failure: return "IoFailure";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::not_in_dual_image: return "NotInDualImage";
    case errc::degenerate_probe: return "DegenerateProbe";
    case errc::no_pair_mass: return "NoPairMass";
    case errc::not_factorizable: return "NotFactorizable";
    case errc::zero_displacement: return "ZeroDisplacement";
    case errc::singular_system: return "SingularSystem";
    case errc::no_minimizer: return "NoMinimizer";
    case errc::distribution_collapsed: return "DistributionCollapsed";
    }
    return "UnknownError";
}

SoftmaxModel::SoftmaxModel(std::vector<std::string> labels, MatrixRM gamma)
    : labels_(std::move(labels)), gamma_(std::move(gamma)) {
    validate(labels_, gamma_);
}

SoftmaxModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(errc::io_failure, "cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(errc::malformed_header, "empty file '" + path + "'");
    }
    json header = parse_header(line);
    const auto v = header["V"].get<int64_t>();
    const auto d = header["d"].get<int64_t>();
    if (v < 2) {
        throw Error(errc::vocabulary_too_small,
                    "header declares V=" + std::to_string(v));
    }
    if (d < 1) {
        throw Error(errc::malformed_header,
                    "header declares d=" + std::to_string(d));
    }

    MatrixRM gamma(v, d);
    if (header.value("inline", false)) {
        // Pure-JSON variant: the whole file is one JSON document.
        in.seekg(0);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.contains("matrix") ||
            !doc["matrix"].is_array()) {
            throw Error(errc::malformed_header,
                        "inline variant requires a 'matrix' array");
        }
        const auto& rows = doc["matrix"];
        if (static_cast<int64_t>(rows.size()) != v) {
            throw Error(errc::payload_truncated,
                        "matrix has " + std::to_string(rows.size()) +
                            " rows, header declares " + std::to_string(v));
        }
        for (int64_t i = 0; i < v; ++i) {
            const auto& row = rows[i];
            if (!row.is_array() || static_cast<int64_t>(row.size()) != d) {
                throw Error(errc::payload_truncated,
                            "matrix row " + std::to_string(i) +
                                " does not have d entries");
            }
            for (int64_t j = 0; j < d; ++j) {
                gamma(i, j) = row[j].get<double>();
            }
        }
    } else {
        std::vector<uint64_t> payload(static_cast<size_t>(v * d));
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * 8));
        if (in.gcount() != static_cast<std::streamsize>(payload.size() * 8)) {
            throw Error(errc::payload_truncated,
                        "payload holds " + std::to_string(in.gcount() / 8) +
                            " values, header declares " + std::to_string(v * d));
        }
        char extra;
        if (in.read(&extra, 1), in.gcount() != 0) {
            throw Error(errc::payload_truncated,
                        "payload has trailing bytes beyond V*d values");
        }
        for (int64_t i = 0; i < v; ++i) {
            for (int64_t j = 0; j < d; ++j) {
                gamma(i, j) = from_le_bits(payload[static_cast<size_t>(i * d + j)]);
            }
        }
    }
    return SoftmaxModel(read_labels(header), std::move(gamma));
}

void save_model(const SoftmaxModel& model, const std::string& path) {
    json header{{"version", 1},
                {"V", model.vocab_size()},
                {"d", model.dim()},
                {"labels", model.labels()}};

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(errc::io_failure, "cannot open '" + tmp + "' for writing");
        }
        out << header.dump() << "\n";
        for (int i = 0; i < model.vocab_size(); ++i) {
            for (int j = 0; j < model.dim(); ++j) {
                const uint64_t bits = to_le_bits(model.gamma()(i, j));
                out.write(reinterpret_cast<const char*>(&bits), 8);
            }
        }
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw Error(errc::io_failure, "write to '" + tmp + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(errc::io_failure,
                    "rename to '" + path + "' failed: " + ec.message());
    }
}

namespace detail {

std::vector<int> top_k_indices(const Eigen::VectorXd& probs, int k) {
    std::vector<int> order(static_cast<size_t>(probs.size()));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                          if (probs[a] != probs[b]) return probs[a] > probs[b];
                          return a < b;
                      });
    order.resize(static_cast<size_t>(k));
    return order;
}

} // namespace detail

RestrictedModel restrict_top_k(const SoftmaxModel& model,
                               const PrimalPoint& lambda, int k) {
    if (k < 2 || k > model.vocab_size()) {
        throw Error(errc::invalid_argument,
                    "top-k count " + std::to_string(k) + " outside [2, V]");
    }
    const ProbVector p = softmax_probs(model, lambda);
    std::vector<int> keep = detail::top_k_indices(p.probs, k);
    std::sort(keep.begin(), keep.end()); // preserve original item order

    MatrixRM sub(k, model.dim());
    std::vector<std::string> labels(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        sub.row(i) = model.gamma().row(keep[static_cast<size_t>(i)]);
        labels[static_cast<size_t>(i)] =
            model.labels()[static_cast<size_t>(keep[static_cast<size_t>(i)])];
    }
    return RestrictedModel{SoftmaxModel(std::move(labels), std::move(sub)),
                           std::move(keep)};
}

} // namespace geosteer
