#include "knnsampler/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knnsampler/errors.hpp"
#include "knnsampler/imputers.hpp"
#include "knnsampler/neighbors.hpp"
#include "knnsampler/parallel.hpp"

namespace knnsampler {

std::size_t KRule::k_for(std::size_t n) const {
    if (fixed_k) {
        return *fixed_k;
    }
    const double e = 2.0 / (2.0 + intrinsic_dim_d);
    const double raw = c * std::pow(static_cast<double>(n), e);
    const auto k = static_cast<std::size_t>(std::llround(raw));
    return std::max<std::size_t>(k, 1);
}

std::string KRule::describe() const {
    std::ostringstream out;
    if (fixed_k) {
        out << "fixed k = " << *fixed_k;
    } else {
        out << "k = round(" << c << " * n^(2/(2+" << intrinsic_dim_d << ")))";
    }
    return out.str();
}

std::vector<double> reference_conditional_sample(SetupKind setup, double query_x, std::size_t size,
                                                 RngStream& rng, double window_halfwidth) {
    if (size == 0) {
        throw ConfigError("reference size must be positive");
    }
    std::vector<double> values;
    values.reserve(size);
    if (setup == SetupKind::linear_chisq) {
        for (std::size_t i = 0; i < size; ++i) {
            values.push_back(query_x + rng.chisq2());
        }
        return values;
    }
    if (!(window_halfwidth > 0.0)) {
        throw ConfigError("reference window halfwidth must be positive");
    }
    const std::uint64_t budget = std::max<std::uint64_t>(1'000'000ULL, 2000ULL * size);
    const double sd = std::sqrt(0.1);
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (std::uint64_t attempts = 0; attempts < budget && values.size() < size; ++attempts) {
        const double theta = rng.uniform(0.0, kTwoPi);
        const double radius = 1.0 + sd * rng.normal();
        const double x = radius * std::cos(theta);
        if (std::abs(x - query_x) <= window_halfwidth) {
            values.push_back(radius * std::sin(theta));
        }
    }
    if (values.size() < size) {
        throw ReferenceInfeasibleError("reference window produced " + std::to_string(values.size()) +
                                       " of " + std::to_string(size) + " points within the budget");
    }
    return values;
}

double fit_loglog_slope(const std::vector<std::size_t>& ns, const std::vector<double>& values) {
    if (ns.size() != values.size() || ns.size() < 2) {
        throw ConsistencyError("slope fit needs at least two aligned points");
    }
    const std::size_t n = ns.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(static_cast<double>(ns[i]));
        const double ly = std::log(std::max(values[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (denom == 0.0) {
        throw ConsistencyError("slope fit is degenerate");
    }
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

ConvergenceReport run_convergence_experiment(SetupKind setup, double query_x,
                                             const std::vector<std::size_t>& n_grid,
                                             std::size_t replicates, const KRule& rule,
                                             std::size_t reference_size,
                                             std::optional<Kernel> kernel,
                                             std::uint64_t master_seed, int threads) {
    if (n_grid.empty()) {
        throw ConfigError("n grid must be non-empty");
    }
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
        if (n_grid[i] <= n_grid[i - 1]) {
            throw ConfigError("n grid must be strictly increasing");
        }
    }
    if (replicates < 3) {
        throw ConfigError("convergence experiment needs at least 3 replicates");
    }
    if (!rule.fixed_k) {
        const double e = 2.0 / (2.0 + rule.intrinsic_dim_d);
        if (rule.c * std::pow(static_cast<double>(n_grid.front()), e) < 1.0) {
            throw ConfigError("k rule yields k < 1 at the smallest n");
        }
    }
    std::vector<std::size_t> k_values;
    k_values.reserve(n_grid.size());
    for (std::size_t n : n_grid) {
        const std::size_t k = rule.k_for(n);
        if (k > n) {
            throw ConfigError("k rule yields k > n at n = " + std::to_string(n));
        }
        k_values.push_back(k);
    }

    // Tag far above the cell-id space (ni * 1'000'003 + rep + 1) so the
    // reference stream can never coincide with a cell stream.
    RngStream ref_rng(mix64(master_seed, 0xFFFFFFFF000007E5ULL), 0);
    const std::vector<double> ref_values =
        reference_conditional_sample(setup, query_x, reference_size, ref_rng);

    Kernel kern = kernel.value_or(Kernel{KernelFamily::gaussian, median_heuristic_alpha(ref_values)});
    kern.validate();

    const WeightedSample reference = WeightedSample::uniform(ref_values);
    const double ref_self = mmd_self_term(reference, kern, threads);

    ConvergenceReport report;
    report.setup = setup;
    report.query_x = query_x;
    report.n_grid = n_grid;
    report.k_values = k_values;
    report.k_rule = rule;
    report.replicates = replicates;
    report.reference_size = reference_size;
    report.kernel_alpha = kern.scale_alpha;
    report.master_seed = master_seed;

    const std::vector<double> query{query_x};
    std::vector<std::vector<double>> mmd2(n_grid.size(), std::vector<double>(replicates, 0.0));
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
        for (std::size_t rep = 0; rep < replicates; ++rep) {
            const std::uint64_t cell_seed = mix64(master_seed, ni * 1'000'003ULL + rep + 1);
            RngStream gen(cell_seed, 0);
            const std::vector<XyPair> pairs = generate(setup, n_grid[ni], gen);
            std::vector<std::vector<double>> xs;
            xs.reserve(pairs.size());
            std::vector<double> ys;
            ys.reserve(pairs.size());
            for (const auto& p : pairs) {
                xs.push_back({p.x});
                ys.push_back(p.y);
            }
            const NeighborIndex index(xs, Acceleration::spatial_tree);
            RngStream tie_rng(cell_seed, 1);
            const EmpiricalConditional conditional =
                knn_conditional(index, ys, query, k_values[ni], tie_rng);
            const WeightedSample estimate = WeightedSample::uniform(conditional.support);
            const double value = mmd_self_term(estimate, kern, threads) -
                                 2.0 * mmd_cross_term(estimate, reference, kern, threads) + ref_self;
            mmd2[ni][rep] = value < 0.0 ? 0.0 : value;
        }
    }

    report.mmd2_mean.resize(n_grid.size());
    report.mmd2_std.resize(n_grid.size());
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
        KahanAccumulator mean_acc;
        for (double v : mmd2[ni]) {
            mean_acc.add(v);
        }
        const double mean = mean_acc.value() / static_cast<double>(replicates);
        KahanAccumulator var_acc;
        for (double v : mmd2[ni]) {
            const double d = v - mean;
            var_acc.add(d * d);
        }
        report.mmd2_mean[ni] = mean;
        report.mmd2_std[ni] = std::sqrt(var_acc.value() / static_cast<double>(replicates - 1));
    }
    report.fitted_slope = fit_loglog_slope(n_grid, report.mmd2_mean);
    return report;
}

BimodalityCheck check_bimodality(std::span<const double> values, std::size_t n_bins) {
    if (values.size() < 2 || n_bins < 3) {
        throw ConfigError("bimodality check needs >= 2 values and >= 3 bins");
    }
    BimodalityCheck result;
    result.lo = *std::min_element(values.begin(), values.end());
    result.hi = *std::max_element(values.begin(), values.end());
    result.counts.assign(n_bins, 0);
    if (result.hi <= result.lo) {
        return result; // all values identical: one degenerate bin, not bimodal
    }
    const double scale = static_cast<double>(n_bins) / (result.hi - result.lo);
    for (double v : values) {
        auto bin = static_cast<std::size_t>((v - result.lo) * scale);
        bin = std::min(bin, n_bins - 1);
        ++result.counts[bin];
    }

    // Plateau-aware local maxima: compress equal runs, then compare to the
    // nearest differing neighbours.
    std::vector<std::pair<std::size_t, std::size_t>> runs; // (first bin, count value)
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (runs.empty() || runs.back().second != result.counts[b]) {
            runs.emplace_back(b, result.counts[b]);
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> peaks; // (bin, height)
    std::size_t global_max = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        global_max = std::max(global_max, runs[r].second);
        const bool rises = r == 0 || runs[r - 1].second < runs[r].second;
        const bool falls = r + 1 == runs.size() || runs[r + 1].second < runs[r].second;
        if (rises && falls && runs[r].second > 0) {
            peaks.emplace_back(runs[r].first, runs[r].second);
        }
    }
    if (peaks.size() < 2) {
        return result;
    }

    // A mode pair is two substantial local maxima (each at least a quarter of
    // the tallest bin, so tail noise spikes do not count) whose connecting
    // valley is at most half the smaller of the two.  Among qualifying pairs
    // keep the one with the tallest smaller peak, then the widest span.
    const std::size_t floor_height = (global_max + 3) / 4;
    bool found = false;
    std::size_t best_min_peak = 0;
    std::size_t best_span = 0;
    for (std::size_t a = 0; a < peaks.size(); ++a) {
        for (std::size_t c = a + 1; c < peaks.size(); ++c) {
            if (peaks[c].first <= peaks[a].first + 1) {
                continue;
            }
            const std::size_t min_peak = std::min(peaks[a].second, peaks[c].second);
            if (min_peak < floor_height) {
                continue;
            }
            std::size_t valley = min_peak;
            std::size_t valley_bin = peaks[a].first;
            for (std::size_t b = peaks[a].first + 1; b < peaks[c].first; ++b) {
                if (result.counts[b] < valley) {
                    valley = result.counts[b];
                    valley_bin = b;
                }
            }
            if (2 * valley > min_peak) {
                continue;
            }
            const std::size_t span = peaks[c].first - peaks[a].first;
            if (!found || min_peak > best_min_peak ||
                (min_peak == best_min_peak && span > best_span)) {
                found = true;
                best_min_peak = min_peak;
                best_span = span;
                result.peak_left_bin = peaks[a].first;
                result.peak_right_bin = peaks[c].first;
                result.peak_left = static_cast<double>(peaks[a].second);
                result.peak_right = static_cast<double>(peaks[c].second);
                result.valley_bin = valley_bin;
                result.valley = static_cast<double>(valley);
            }
        }
    }
    if (!found) {
        // Report the two tallest peaks for diagnostics.
        std::vector<std::size_t> order(peaks.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
            if (peaks[lhs].second != peaks[rhs].second) {
                return peaks[lhs].second > peaks[rhs].second;
            }
            return peaks[lhs].first < peaks[rhs].first;
        });
        std::size_t p1 = order[0];
        std::size_t p2 = order[1];
        if (peaks[p1].first > peaks[p2].first) {
            std::swap(p1, p2);
        }
        result.peak_left_bin = peaks[p1].first;
        result.peak_right_bin = peaks[p2].first;
        result.peak_left = static_cast<double>(peaks[p1].second);
        result.peak_right = static_cast<double>(peaks[p2].second);
        std::size_t valley = peaks[p1].second;
        std::size_t valley_bin = peaks[p1].first;
        for (std::size_t b = result.peak_left_bin + 1; b < result.peak_right_bin; ++b) {
            if (result.counts[b] < valley) {
                valley = result.counts[b];
                valley_bin = b;
            }
        }
        result.valley_bin = valley_bin;
        result.valley = static_cast<double>(valley);
    }
    result.bimodal = found;
    return result;
}

void save_convergence_report(const ConvergenceReport& report, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["setup"] = setup_name(report.setup);
    j["query_x"] = report.query_x;
    j["n_grid"] = report.n_grid;
    j["k_values"] = report.k_values;
    j["k_rule"] = {{"c", report.k_rule.c},
                   {"intrinsic_dim_d", report.k_rule.intrinsic_dim_d},
                   {"description", report.k_rule.describe()}};
    if (report.k_rule.fixed_k) {
        j["k_rule"]["fixed_k"] = *report.k_rule.fixed_k;
    }
    j["replicates"] = report.replicates;
    j["reference_size"] = report.reference_size;
    j["kernel_alpha"] = report.kernel_alpha;
    j["master_seed"] = report.master_seed;
    j["mmd2_mean"] = report.mmd2_mean;
    j["mmd2_std"] = report.mmd2_std;
    j["fitted_slope"] = report.fitted_slope;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write report: " + path);
    }
    out << j.dump(2) << '\n';
}

} // namespace knnsampler
