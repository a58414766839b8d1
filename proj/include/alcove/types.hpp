#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace alcove {

// Row-major so that a row is one contiguous feature vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

// Raised when a query strategy cannot run in the current pool state
// (e.g. ALFA-Mix without any labeled anchors).
class StrategyUnavailable : public Error {
public:
    using Error::Error;
};

// Gathers the given rows of `m` into a new matrix, preserving order.
Matrix gather_rows(const Matrix& m, const IndexList& rows);

}  // namespace alcove
