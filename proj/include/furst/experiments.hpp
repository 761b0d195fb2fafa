#pragma once

#include "furst/config.hpp"
#include "furst/ensemble.hpp"
#include "furst/measure.hpp"

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace furst {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr double      kDefaultBudget = 1e12;

/// CLI subcommand names, in the order they are documented.
const std::vector<std::string>& experiment_kinds();

/// Command-line overrides; unset fields fall back to the config file, then defaults.
struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int>           workers;
    std::optional<double>        budget;
    std::optional<std::string>   out;
};

struct RunResult {
    std::string              outDir;
    std::vector<std::string> files;  // CSV files written, relative to outDir
    std::uint64_t            seed = 0;
    double                   estimatedOps = 0.0;
};

/// $FURSTLAB_OUT_DIR if set, otherwise "furstlab_out".
std::string default_out_dir();

/// Dispatches `kind` (CLI spelling, e.g. "ld-tail") on the config and writes CSVs plus
/// manifest.json. Throws ValidationError, BudgetError, InternalConsistencyError, ...
RunResult run_experiment(const std::string& kind, const RunConfig& config, const RunOptions& options = {});

/// Maps an exception to the documented exit status (2 validation, 3 budget, 4 consistency).
int exit_code_for(const std::exception& e);

// ---------------------------------------------------------------- CSV

/// Round-trip formatting: 17 significant digits, '.' decimal point, locale independent.
std::string format_double(double x);

class CsvWriter {
public:
    using Cell = std::variant<double, long, std::size_t, std::string>;
    CsvWriter(const std::string& path, std::initializer_list<const char*> header);
    void row(std::initializer_list<Cell> cells);

private:
    std::ofstream out_;
    std::size_t   columns_;
    std::string   path_;
};

// ---------------------------------------------------------------- random instances

/// Finite ensemble of `atoms` generic SL(2) maps R(a) diag(s, 1/s) R(b), random weights.
MatrixEnsemble random_finite_ensemble(int atoms, Stream& stream);
/// Atomic probability measure with `atoms` random points of RP^(d-1).
ProjectiveMeasure random_measure(int atoms, int d, Stream& stream);
/// Measure on RP^2 carrying 0-3 heavy projective lines (3-5 atoms each, total >= 1/4)
/// plus generic atoms; every atom weighs at most 1/8 so the heavy-line hypothesis holds.
ProjectiveMeasure random_heavy_line_measure(Stream& stream);

}  // namespace furst
