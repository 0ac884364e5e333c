#pragma once

#include <cstddef>
#include <vector>

#include "adrgraph/common.hpp"

namespace adrgraph {

/// Probability that a random positive outranks a random negative, ties
/// counted 0.5 (Mann-Whitney). Throws ValidationError unless both classes
/// are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Average precision: sum over positives of precision-at-k, ties broken by
/// stable sort on score descending then original index. Throws
/// ValidationError when no positive is present.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Ci95 {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * sd / sqrt(n); 0 when n < 2
};

/// Normal-approximation 95% confidence interval over per-seed values.
Ci95 ci95(const std::vector<double>& values);

}  // namespace adrgraph
