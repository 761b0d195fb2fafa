#pragma once

#include "furst/ensemble.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace furst {

/// Parsed run configuration. The file format is JSON; see README for the grammar.
struct RunConfig {
    std::string                           experiment;  // optional "experiment" key
    std::optional<std::uint64_t>          seed;
    std::optional<int>                    workers;
    std::optional<double>                 budget;
    std::optional<std::string>            out;
    std::map<std::string, MatrixEnsemble> ensembles;
    std::optional<Schedule>               schedule;
    nlohmann::json                        root;  // whole document, for experiment sections
    std::string                           source;
    std::uint64_t                         hash = 0;  // FNV-1a of the file bytes
};

std::uint64_t fnv1a(const std::string& bytes);

/// Parses and validates. Errors are ValidationError with "source:line:col" for syntax
/// and a dotted key path (e.g. ensembles.a.atoms[1].matrix) for content.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Typed access to a JSON object with key-path diagnostics.
class Section {
public:
    Section(const nlohmann::json& node, std::string path);

    bool               has(const std::string& key) const;
    const std::string& path() const noexcept { return path_; }
    std::string        child_path(const std::string& key) const;
    Section            section(const std::string& key) const;  // empty object if absent

    double        number(const std::string& key) const;
    double        number(const std::string& key, double fallback) const;
    long          integer(const std::string& key) const;
    long          integer(const std::string& key, long fallback) const;
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
    bool          boolean(const std::string& key, bool fallback) const;
    std::string   string(const std::string& key) const;
    std::string   string(const std::string& key, const std::string& fallback) const;
    std::vector<double>      numbers(const std::string& key) const;
    std::vector<long>        integers(const std::string& key) const;
    std::vector<long>        integers(const std::string& key, std::vector<long> fallback) const;
    std::vector<std::string> strings(const std::string& key) const;

    const nlohmann::json& node() const noexcept { return *node_; }

private:
    const nlohmann::json& at(const std::string& key) const;

    const nlohmann::json* node_;
    std::string           path_;
};

}  // namespace furst
