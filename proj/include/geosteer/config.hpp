#pragma once

#include "geosteer/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geosteer {

/// Flat sectioned key-value run configuration:
///   [section]
///   key = value      # trailing comments allowed
/// Unknown sections and keys are rejected by the commands that read them.
class ConfigFile {
  public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> raw(const std::string& section,
                                   const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    std::string require_string(const std::string& section,
                               const std::string& key) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    int get_int(const std::string& section, const std::string& key,
                int fallback) const;
    bool get_bool(const std::string& section, const std::string& key,
                  bool fallback) const;
    std::optional<double> get_optional_double(const std::string& section,
                                              const std::string& key) const;
    std::optional<int> get_optional_int(const std::string& section,
                                        const std::string& key) const;

    /// Comma- or whitespace-separated doubles.
    std::vector<double> get_vector(const std::string& section,
                                   const std::string& key) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections()
        const {
        return sections_;
    }

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Points file: one primal vector per line, comma- or whitespace-separated;
/// '#' starts a comment.
std::vector<PrimalPoint> load_points(const std::string& path);
void save_points(const std::vector<PrimalPoint>& points,
                 const std::string& path);

} // namespace geosteer
