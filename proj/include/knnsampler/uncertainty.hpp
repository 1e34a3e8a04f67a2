#pragma once

#include <span>

#include "knnsampler/imputers.hpp"

namespace knnsampler {

// Empirical prediction interval from a kNN conditional distribution.
struct PredictionInterval {
    double lower = 0.0;
    double upper = 0.0;
    double nominal = 0.0; // the level 1 - alpha
};

// Fraction of the conditional's mass strictly inside (set_lower, set_upper).
// Pass +-infinity for unbounded sides.
double conditional_probability(const EmpiricalConditional& conditional, double set_lower,
                               double set_upper);

// Interval between the r-th smallest and r-th largest support values with
// r = ceil(k * alpha / 2); e.g. k = 200, alpha = 0.05 gives the 5th smallest
// and 5th largest responses.  Throws InfeasibleLevelError when 2r > k.
PredictionInterval prediction_interval(const EmpiricalConditional& conditional, double alpha);

// Standard deviation of the conditional itself (denominator k).
double conditional_std(const EmpiricalConditional& conditional);

// Fraction of truths strictly inside their interval.
double coverage_probability(std::span<const PredictionInterval> intervals,
                            std::span<const double> truths);

} // namespace knnsampler
