#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace knnsampler {

struct ImputationRun;

// One unit with an observed response.
struct ObservedPair {
    std::vector<double> x;
    double y = 0.0;
};

// One unit whose response is missing; `truth` holds the hidden value when
// the dataset came from a masked benchmark.
struct MissingUnit {
    std::vector<double> x;
    std::optional<double> truth;
};

// Covariate-response table split into observed pairs and missing units.
// Immutable once built; safe to share across worker threads.  Row
// bookkeeping preserves the original file order so saved output keeps the
// input layout.
struct Dataset {
    std::vector<ObservedPair> observed;
    std::vector<MissingUnit> missing;
    std::size_t dim_p = 0;

    // Original row layout: row r is observed[row_pos[r]] when
    // row_is_missing[r] is 0, otherwise missing[row_pos[r]].
    std::vector<std::uint8_t> row_is_missing;
    std::vector<std::size_t> row_pos;

    std::vector<std::string> covariate_names;
    std::string response_name = "y";
    std::optional<std::string> truth_name;

    std::size_t n() const { return observed.size(); }
    std::size_t m() const { return missing.size(); }
    std::size_t total() const { return observed.size() + missing.size(); }

    std::vector<std::vector<double>> observed_covariates() const;
    std::vector<double> observed_responses() const;
    std::vector<double> missing_truths() const; // throws if any truth absent

    // Checks covariate dimensions, row bookkeeping, and truth finiteness.
    void validate() const;
};

// Imputation method identifiers shared by configuration, CLI and reports.
enum class Method { knn_sampler, knn_imputer, linear, knn_kde };

std::string method_name(Method method);
std::optional<Method> method_from_name(const std::string& name); // accepts '-' or '_'

// Per-method configuration.  k empty means "auto": resolve via LOOCV for the
// sampler, the conventional default 5 for the mean imputer, and n for
// kNNxKDE.  tau and bandwidth_h apply to kNNxKDE only.
struct MethodConfig {
    Method method = Method::knn_sampler;
    std::optional<std::size_t> k;
    double tau = 50.0;
    double bandwidth_h = 0.03;

    bool k_resolved() const { return k.has_value(); }
};

// Column name of the boolean flag appended by save_imputed.
inline constexpr const char* kImputedFlagColumn = "__imputed__";

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Strict double parse of a trimmed cell; empty optional on failure.
std::optional<double> parse_double(const std::string& cell);

// Reads a delimited text file (comma separator, header row, LF or CRLF).
// Rows whose response cell is empty or "NaN" (case-insensitive) become
// missing units; a truth column, when named, fills MissingUnit::truth.
Dataset load_dataset(const std::string& path,
                     const std::vector<std::string>& covariate_columns,
                     const std::string& response_column,
                     const std::optional<std::string>& truth_column = std::nullopt);

// Writes the dataset in its original row order; missing responses are empty
// cells and truth values, when tracked, go to the truth column.
void save_dataset(const Dataset& dataset, const std::string& path);

// Writes the dataset with missing responses replaced by the run's values and
// a __imputed__ flag column appended (1 for imputed rows, 0 otherwise).
void save_imputed(const Dataset& dataset, const ImputationRun& imputations, const std::string& path);

// Flag column of a file produced by save_imputed; empty optional when the
// file has no such column.
std::optional<std::vector<bool>> load_imputed_flags(const std::string& path);

} // namespace knnsampler
