#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "alcove/rng.hpp"
#include "alcove/types.hpp"

namespace alcove {

// Tie-breaking everywhere in this module: the smallest index wins.

struct Clustering {
    Matrix centroids;              // k×d
    std::vector<int> assignments;  // per point, in [0, k)
    double inertia = 0.0;          // sum of squared point-to-centroid distances
    // Inertia after the seeding assignment and after every Lloyd step.
    std::vector<double> inertia_history;
    IndexList seeds;
    bool converged = false;

    int k() const { return static_cast<int>(centroids.rows()); }
};

inline double sq_dist(const Matrix& a, Index i, const Matrix& b, Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

// Entry (i, j) = ||a_i - b_j||^2, never negative.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b);

struct Neighbors {
    std::vector<IndexList> indices;             // per point, nearest first
    std::vector<std::vector<double>> distances;  // Euclidean, ascending
};

// Exact k nearest neighbours of every point, excluding the point itself.
Neighbors knn(const Matrix& points, int k);

// k-means++ (D^2) seeding over `count` items under an arbitrary squared
// distance. The first seed is uniform; each further seed is drawn with
// probability proportional to its squared distance to the nearest seed.
// When every remaining weight is zero (duplicates) the next seed is uniform
// over the unchosen items, so the result always has k distinct indices.
template <class SqDistFn>
IndexList kmeanspp_seed_with(Index count, int k, Rng& rng, SqDistFn&& dist2) {
    if (k < 0 || k > count) throw std::invalid_argument("kmeans++: k must lie in [0, M]");
    IndexList seeds;
    if (k == 0) return seeds;
    seeds.reserve(static_cast<std::size_t>(k));
    std::vector<double> mind(static_cast<std::size_t>(count), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<std::size_t>(count), 0);

    auto add = [&](Index s) {
        seeds.push_back(s);
        chosen[s] = 1;
        for (Index j = 0; j < count; ++j) {
            if (chosen[j]) {
                mind[j] = 0.0;
                continue;
            }
            const double dd = dist2(j, s);
            if (dd < mind[j]) mind[j] = dd;
        }
    };

    add(rng.uniform_index(count));
    while (static_cast<int>(seeds.size()) < k) {
        double total = 0.0;
        for (Index j = 0; j < count; ++j) total += mind[j];
        Index pick = -1;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double cum = 0.0;
            for (Index j = 0; j < count; ++j) {
                if (mind[j] <= 0.0) continue;
                cum += mind[j];
                pick = j;
                if (cum > u) break;
            }
        } else {
            Index r = rng.uniform_index(count - static_cast<Index>(seeds.size()));
            for (Index j = 0; j < count; ++j) {
                if (chosen[j]) continue;
                if (r-- == 0) {
                    pick = j;
                    break;
                }
            }
        }
        add(pick);
    }
    return seeds;
}

IndexList kmeanspp_seed(const Matrix& points, int k, Rng& rng);

// Lloyd iterations from k-means++ seeds until the assignment stops changing
// or `max_iters` updates have run. An emptied cluster is re-seeded at the
// point farthest from its own centroid (taken from a cluster with more than
// one member).
Clustering kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iters = 100);

// One index per non-empty cluster (in cluster order): the member closest to
// its centroid.
IndexList nearest_to_centroids(const Matrix& points, const Clustering& clustering);

// Greedy farthest-first traversal. `existing` act as already chosen
// centres; with none, the first pick is the point farthest from the mean.
IndexList greedy_k_center(const Matrix& points, const IndexList& existing, int b);

// max_i min_{c in centers} ||x_i - x_c||.
double covering_radius(const Matrix& points, const IndexList& centers);

}  // namespace alcove
