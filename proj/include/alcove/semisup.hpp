#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "alcove/types.hpp"

namespace alcove {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric kNN affinity: a_ij = max(0, cos(z_i, z_j))^3 for j among the k
// most cosine-similar points of i, symmetrised with max(a_ij, a_ji), zero
// diagonal. k >= N is clamped to N - 1.
SparseMatrix knn_affinity(const Matrix& features, int k = 500);

// D^{-1/2} W D^{-1/2}; isolated nodes keep an all-zero row.
SparseMatrix normalize_affinity(const SparseMatrix& w);

inline SparseMatrix build_knn_graph(const Matrix& features, int k = 500) {
    return normalize_affinity(knn_affinity(features, k));
}

struct PropagationResult {
    Matrix pseudo_probs;           // row-stochastic; seed rows are their one-hot labels
    std::vector<double> weights;   // 1 - H(row)/ln(C), seeds weigh 1
    Matrix scores;                 // unnormalised fixpoint F
    std::vector<double> residuals;  // ||F_{t+1} - F_t||_F per sweep
    int iterations = 0;
};

// Iterates F <- alpha S F + (1 - alpha) Y from F = Y until the update falls
// below `tol` or `max_iters` sweeps. Rows of Y with positive mass are the
// seeds. Throws std::invalid_argument if there are none.
PropagationResult label_propagate(const SparseMatrix& s, const Matrix& seeds, double alpha = 0.9,
                                  int max_iters = 1000, double tol = 1e-6);

// (1 - alpha)(I - alpha S)^{-1} Y by a dense LU solve.
Matrix label_propagate_closed_form(const SparseMatrix& s, const Matrix& seeds, double alpha = 0.9);

// 1 - H(p)/ln(C) for a probability row, clamped to [0, 1].
double confidence_weight(const Eigen::Ref<const Eigen::RowVectorXd>& p);

}  // namespace alcove
