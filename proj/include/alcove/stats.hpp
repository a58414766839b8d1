#pragma once

#include <span>
#include <string>
#include <vector>

#include "alcove/harness.hpp"

namespace alcove {

// Gate for "strategy i surpasses strategy j at an iteration". Hard-coded;
// it is the two-sided 0.05 Student-t quantile at four degrees of freedom.
inline constexpr double kSignificanceThreshold = 2.776;

// c = sqrt(n) * mu / sigma over paired differences, with sigma normalised by
// n (not n - 1). sigma = 0 gives +inf for mu > 0, -inf for mu < 0, 0 for
// mu = 0, so a uniformly better strategy still registers a win.
double paired_t_stat(std::span<const double> diffs);

inline bool surpasses(double c) { return c > kSignificanceThreshold; }

// Per iteration shared by both sides: c over seed-paired accuracy
// differences (i minus j). Throws std::invalid_argument when the seed sets
// differ.
std::vector<double> paired_t_series(const std::vector<RunRecord>& records_i,
                                    const std::vector<RunRecord>& records_j);

// Fraction of the common iterations at which i surpasses j.
double win_fraction(const std::vector<RunRecord>& records_i, const std::vector<RunRecord>& records_j);

struct DatasetRecords {
    std::string name;
    std::vector<RunRecord> records;
};

struct WinMatrix {
    std::vector<std::string> strategies;
    Matrix wins;  // wins(i, j): summed win fraction of i over j
    std::vector<std::string> datasets;
    std::vector<Matrix> per_dataset;
};

// Per-dataset win fractions for every ordered strategy pair, summed across
// datasets. Strategies are ordered by first appearance.
WinMatrix win_matrix(const std::vector<DatasetRecords>& groups);

}  // namespace alcove
