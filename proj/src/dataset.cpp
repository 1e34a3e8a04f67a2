#include "knnsampler/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "knnsampler/errors.hpp"
#include "knnsampler/imputers.hpp"

namespace knnsampler {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

bool is_nan_marker(const std::string& cell) {
    if (cell.size() != 3) {
        return false;
    }
    auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    return lower(cell[0]) == 'n' && lower(cell[1]) == 'a' && lower(cell[2]) == 'n';
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    // A trailing newline produces no extra element with getline; drop any
    // genuinely empty final line left by editors.
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    return lines;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw SchemaError("column not found: " + name);
}

} // namespace

std::vector<std::vector<double>> Dataset::observed_covariates() const {
    std::vector<std::vector<double>> out;
    out.reserve(observed.size());
    for (const auto& pair : observed) {
        out.push_back(pair.x);
    }
    return out;
}

std::vector<double> Dataset::observed_responses() const {
    std::vector<double> out;
    out.reserve(observed.size());
    for (const auto& pair : observed) {
        out.push_back(pair.y);
    }
    return out;
}

std::vector<double> Dataset::missing_truths() const {
    std::vector<double> out;
    out.reserve(missing.size());
    for (const auto& unit : missing) {
        if (!unit.truth) {
            throw ConsistencyError("missing unit has no recorded truth");
        }
        out.push_back(*unit.truth);
    }
    return out;
}

void Dataset::validate() const {
    for (const auto& pair : observed) {
        if (pair.x.size() != dim_p) {
            throw ConsistencyError("observed covariate dimension mismatch");
        }
    }
    for (const auto& unit : missing) {
        if (unit.x.size() != dim_p) {
            throw ConsistencyError("missing covariate dimension mismatch");
        }
        if (unit.truth && !std::isfinite(*unit.truth)) {
            throw ConsistencyError("truth value is not finite");
        }
    }
    if (!row_is_missing.empty()) {
        if (row_is_missing.size() != total() || row_pos.size() != total()) {
            throw ConsistencyError("row bookkeeping does not cover all units");
        }
    }
}

std::string method_name(Method method) {
    switch (method) {
        case Method::knn_sampler: return "knn_sampler";
        case Method::knn_imputer: return "knn_imputer";
        case Method::linear: return "linear";
        case Method::knn_kde: return "knn_kde";
    }
    return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
    std::string canon;
    canon.reserve(name.size());
    for (char c : name) {
        canon.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (canon == "knn_sampler") return Method::knn_sampler;
    if (canon == "knn_imputer") return Method::knn_imputer;
    if (canon == "linear") return Method::linear;
    if (canon == "knn_kde") return Method::knn_kde;
    return std::nullopt;
}

std::string format_double(double v) {
    std::array<char, 40> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) {
        throw IoError("failed to format number");
    }
    return std::string(buf.data(), ptr);
}

std::optional<double> parse_double(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    // from_chars accepts "inf"/"nan" spellings; dataset cells must be finite.
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

Dataset load_dataset(const std::string& path,
                     const std::vector<std::string>& covariate_columns,
                     const std::string& response_column,
                     const std::optional<std::string>& truth_column) {
    if (covariate_columns.empty()) {
        throw SchemaError("at least one covariate column is required");
    }
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) {
        throw SchemaError("file has no header row: " + path);
    }
    const std::vector<std::string> header = split_csv_line(lines[0]);

    std::vector<std::size_t> cov_idx;
    cov_idx.reserve(covariate_columns.size());
    for (const auto& name : covariate_columns) {
        cov_idx.push_back(find_column(header, name));
    }
    const std::size_t resp_idx = find_column(header, response_column);
    std::optional<std::size_t> truth_idx;
    if (truth_column) {
        truth_idx = find_column(header, *truth_column);
    }

    Dataset ds;
    ds.dim_p = covariate_columns.size();
    ds.covariate_names = covariate_columns;
    ds.response_name = response_column;
    ds.truth_name = truth_column;

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::vector<std::string> cells = split_csv_line(lines[r]);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << "row " << r << ": expected " << header.size() << " columns, got " << cells.size();
            throw ParseError(msg.str());
        }

        std::vector<double> x(ds.dim_p);
        for (std::size_t j = 0; j < ds.dim_p; ++j) {
            const auto value = parse_double(cells[cov_idx[j]]);
            if (!value) {
                std::ostringstream msg;
                msg << "row " << r << ", column '" << covariate_columns[j]
                    << "': cannot parse covariate value '" << trim(cells[cov_idx[j]]) << "'";
                throw ParseError(msg.str());
            }
            x[j] = *value;
        }

        const std::string resp_cell = trim(cells[resp_idx]);
        const bool response_missing = resp_cell.empty() || is_nan_marker(resp_cell);
        if (response_missing) {
            MissingUnit unit;
            unit.x = std::move(x);
            if (truth_idx) {
                const std::string truth_cell = trim(cells[*truth_idx]);
                if (!truth_cell.empty() && !is_nan_marker(truth_cell)) {
                    const auto value = parse_double(truth_cell);
                    if (!value) {
                        std::ostringstream msg;
                        msg << "row " << r << ", column '" << *truth_column
                            << "': cannot parse truth value '" << truth_cell << "'";
                        throw ParseError(msg.str());
                    }
                    unit.truth = *value;
                }
            }
            ds.row_is_missing.push_back(1);
            ds.row_pos.push_back(ds.missing.size());
            ds.missing.push_back(std::move(unit));
        } else {
            const auto value = parse_double(resp_cell);
            if (!value) {
                std::ostringstream msg;
                msg << "row " << r << ", column '" << response_column
                    << "': cannot parse response value '" << resp_cell << "'";
                throw ParseError(msg.str());
            }
            ds.row_is_missing.push_back(0);
            ds.row_pos.push_back(ds.observed.size());
            ds.observed.push_back(ObservedPair{std::move(x), *value});
        }
    }

    if (ds.observed.empty()) {
        throw EmptyObservedError("dataset has zero observed responses: " + path);
    }
    ds.validate();
    return ds;
}

namespace {

void write_rows(const Dataset& ds, std::ostream& out,
                const std::vector<double>* imputed, bool flag_column) {
    out << ds.covariate_names[0];
    for (std::size_t j = 1; j < ds.covariate_names.size(); ++j) {
        out << ',' << ds.covariate_names[j];
    }
    out << ',' << ds.response_name;
    if (ds.truth_name) {
        out << ',' << *ds.truth_name;
    }
    if (flag_column) {
        out << ',' << kImputedFlagColumn;
    }
    out << '\n';

    const std::size_t rows = ds.total();
    const bool has_layout = !ds.row_is_missing.empty();
    for (std::size_t r = 0; r < rows; ++r) {
        const bool miss = has_layout ? ds.row_is_missing[r] != 0 : r >= ds.observed.size();
        const std::size_t pos = has_layout ? ds.row_pos[r] : (miss ? r - ds.observed.size() : r);
        const std::vector<double>& x = miss ? ds.missing[pos].x : ds.observed[pos].x;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j > 0) {
                out << ',';
            }
            out << format_double(x[j]);
        }
        out << ',';
        if (miss) {
            if (imputed) {
                out << format_double((*imputed)[pos]);
            }
        } else {
            out << format_double(ds.observed[pos].y);
        }
        if (ds.truth_name) {
            out << ',';
            if (miss && ds.missing[pos].truth) {
                out << format_double(*ds.missing[pos].truth);
            }
        }
        if (flag_column) {
            out << ',' << (miss ? '1' : '0');
        }
        out << '\n';
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    return out;
}

} // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    auto out = open_output(path);
    write_rows(dataset, out, nullptr, false);
}

void save_imputed(const Dataset& dataset, const ImputationRun& imputations, const std::string& path) {
    dataset.validate();
    if (imputations.per_unit.size() != dataset.missing.size()) {
        throw ConsistencyError("imputation count does not match missing units");
    }
    auto out = open_output(path);
    write_rows(dataset, out, &imputations.per_unit, true);
}

std::optional<std::vector<bool>> load_imputed_flags(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) {
        throw SchemaError("file has no header row: " + path);
    }
    const std::vector<std::string> header = split_csv_line(lines[0]);
    std::optional<std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == kImputedFlagColumn) {
            idx = i;
            break;
        }
    }
    if (!idx) {
        return std::nullopt;
    }
    std::vector<bool> flags;
    flags.reserve(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::vector<std::string> cells = split_csv_line(lines[r]);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << "row " << r << ": expected " << header.size() << " columns, got " << cells.size();
            throw ParseError(msg.str());
        }
        const std::string cell = trim(cells[*idx]);
        flags.push_back(cell == "1" || cell == "true");
    }
    return flags;
}

} // namespace knnsampler
