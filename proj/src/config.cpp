#include "geosteer/config.hpp"
#include "geosteer/format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace geosteer {

namespace {

std::string trim(const std::string& text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

double parse_double(const std::string& section, const std::string& key,
                    const std::string& value) {
    try {
        size_t used = 0;
        const double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw Error(errc::invalid_argument, "[" + section + "] " + key +
                                                " = '" + value +
                                                "' is not a number");
    }
}

} // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw Error(errc::invalid_argument,
                            "bad section header on line " +
                                std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            config.sections_[section];
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(errc::invalid_argument,
                        "expected key = value on line " + std::to_string(line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw Error(errc::invalid_argument,
                        "empty key on line " + std::to_string(line_no));
        }
        config.sections_[section][key] = value;
    }
    return config;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(errc::io_failure, "cannot open config '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto sec = sections_.find(section);
    return sec != sections_.end() && sec->second.count(key) > 0;
}

std::optional<std::string> ConfigFile::raw(const std::string& section,
                                           const std::string& key) const {
    const auto sec = sections_.find(section);
    if (sec == sections_.end()) return std::nullopt;
    const auto entry = sec->second.find(key);
    if (entry == sec->second.end()) return std::nullopt;
    return entry->second;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key,
                                   const std::string& fallback) const {
    return raw(section, key).value_or(fallback);
}

std::string ConfigFile::require_string(const std::string& section,
                                       const std::string& key) const {
    const auto value = raw(section, key);
    if (!value.has_value()) {
        throw Error(errc::invalid_argument,
                    "missing required key [" + section + "] " + key);
    }
    return *value;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    const auto value = raw(section, key);
    if (!value.has_value()) return fallback;
    return parse_double(section, key, *value);
}

int ConfigFile::get_int(const std::string& section, const std::string& key,
                        int fallback) const {
    const auto value = raw(section, key);
    if (!value.has_value()) return fallback;
    const double parsed = parse_double(section, key, *value);
    const int as_int = static_cast<int>(parsed);
    if (static_cast<double>(as_int) != parsed) {
        throw Error(errc::invalid_argument,
                    "[" + section + "] " + key + " must be an integer");
    }
    return as_int;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    const auto value = raw(section, key);
    if (!value.has_value()) return fallback;
    if (*value == "true" || *value == "1" || *value == "yes") return true;
    if (*value == "false" || *value == "0" || *value == "no") return false;
    throw Error(errc::invalid_argument,
                "[" + section + "] " + key + " must be a boolean");
}

std::optional<double> ConfigFile::get_optional_double(
    const std::string& section, const std::string& key) const {
    const auto value = raw(section, key);
    if (!value.has_value()) return std::nullopt;
    return parse_double(section, key, *value);
}

std::optional<int> ConfigFile::get_optional_int(const std::string& section,
                                                const std::string& key) const {
    const auto value = raw(section, key);
    if (!value.has_value()) return std::nullopt;
    return get_int(section, key, 0);
}

std::vector<double> ConfigFile::get_vector(const std::string& section,
                                           const std::string& key) const {
    const std::string text = require_string(section, key);
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::istringstream in(normalized);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        values.push_back(parse_double(section, key, token));
    }
    if (values.empty()) {
        throw Error(errc::invalid_argument,
                    "[" + section + "] " + key + " holds no numbers");
    }
    return values;
}

std::vector<PrimalPoint> load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(errc::io_failure, "cannot open points file '" + path + "'");
    }
    std::vector<PrimalPoint> points;
    std::string line;
    Eigen::Index dim = -1;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream tokens(line);
        std::vector<double> values;
        double value = 0.0;
        while (tokens >> value) values.push_back(value);
        if (values.empty()) continue;
        if (dim < 0) {
            dim = static_cast<Eigen::Index>(values.size());
        } else if (dim != static_cast<Eigen::Index>(values.size())) {
            throw Error(errc::invalid_argument,
                        "points file '" + path + "' line " +
                            std::to_string(line_no) + " has inconsistent width");
        }
        points.push_back(PrimalPoint{Eigen::Map<const Eigen::VectorXd>(
            values.data(), static_cast<Eigen::Index>(values.size()))});
    }
    if (points.empty()) {
        throw Error(errc::invalid_argument,
                    "points file '" + path + "' holds no points");
    }
    return points;
}

void save_points(const std::vector<PrimalPoint>& points,
                 const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    for (const auto& point : points) {
        for (Eigen::Index i = 0; i < point.lambda.size(); ++i) {
            if (i) out << ",";
            out << format_double(point.lambda[i]);
        }
        out << "\n";
    }
    if (!out) {
        throw Error(errc::io_failure, "write to '" + path + "' failed");
    }
}

} // namespace geosteer
