#include "alcove/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace alcove {

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument(fmt::format("pairwise_sq_dist: widths {} and {} differ", a.cols(), b.cols()));
    Matrix out(a.rows(), b.rows());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.rows(); ++j) out(i, j) = std::max(0.0, sq_dist(a, i, b, j));
    return out;
}

Neighbors knn(const Matrix& points, int k) {
    const Index m = points.rows();
    if (k < 0 || k >= m) throw std::invalid_argument(fmt::format("knn: need k < M (k={}, M={})", k, m));
    Neighbors out;
    out.indices.resize(static_cast<std::size_t>(m));
    out.distances.resize(static_cast<std::size_t>(m));
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        cand.clear();
        for (Index j = 0; j < m; ++j)
            if (j != i) cand.emplace_back(sq_dist(points, i, points, j), j);
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        auto& idx = out.indices[i];
        auto& dist = out.distances[i];
        idx.reserve(static_cast<std::size_t>(k));
        dist.reserve(static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t) {
            idx.push_back(cand[t].second);
            dist.push_back(std::sqrt(cand[t].first));
        }
    }
    return out;
}

IndexList kmeanspp_seed(const Matrix& points, int k, Rng& rng) {
    return kmeanspp_seed_with(points.rows(), k, rng,
                              [&](Index i, Index j) { return sq_dist(points, i, points, j); });
}

namespace {

// Assigns every point to its nearest centroid; returns the inertia.
double assign(const Matrix& points, const Matrix& centroids, std::vector<int>& assignments) {
    double inertia = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d = sq_dist(points, i, centroids, 0);
        for (Index c = 1; c < centroids.rows(); ++c) {
            const double dd = sq_dist(points, i, centroids, c);
            if (dd < best_d) {
                best_d = dd;
                best = static_cast<int>(c);
            }
        }
        assignments[i] = best;
        inertia += best_d;
    }
    return inertia;
}

double inertia_of(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignments) {
    double inertia = 0.0;
    for (Index i = 0; i < points.rows(); ++i) inertia += sq_dist(points, i, centroids, assignments[i]);
    return inertia;
}

void update_centroids(const Matrix& points, Matrix& centroids, std::vector<int>& assignments) {
    const Index k = centroids.rows();
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++counts[a];

    for (Index c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        Index far = -1;
        double far_d = -1.0;
        for (Index i = 0; i < points.rows(); ++i) {
            if (counts[assignments[i]] <= 1) continue;
            const double dd = sq_dist(points, i, centroids, assignments[i]);
            if (dd > far_d) {
                far_d = dd;
                far = i;
            }
        }
        if (far < 0) continue;  // fewer distinct members than clusters
        --counts[assignments[far]];
        assignments[far] = static_cast<int>(c);
        counts[c] = 1;
        centroids.row(c) = points.row(far);
    }

    Matrix sums = Matrix::Zero(k, points.cols());
    for (Index i = 0; i < points.rows(); ++i) sums.row(assignments[i]) += points.row(i);
    for (Index c = 0; c < k; ++c)
        if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
}

}  // namespace

Clustering kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iters) {
    const Index m = points.rows();
    if (k < 1 || k > m) throw std::invalid_argument(fmt::format("kmeans: need 1 <= k <= M (k={}, M={})", k, m));
    Clustering out;
    Rng rng(seed);
    out.seeds = kmeanspp_seed(points, k, rng);
    out.centroids = gather_rows(points, out.seeds);
    out.assignments.assign(static_cast<std::size_t>(m), 0);
    out.inertia = assign(points, out.centroids, out.assignments);
    out.inertia_history.push_back(out.inertia);

    std::vector<int> next(out.assignments.size());
    for (int it = 0; it < max_iters; ++it) {
        update_centroids(points, out.centroids, out.assignments);
        const double inertia = assign(points, out.centroids, next);
        out.inertia_history.push_back(inertia);
        const bool same = next == out.assignments;
        out.assignments.swap(next);
        if (same) {
            out.converged = true;
            break;
        }
    }
    out.inertia = inertia_of(points, out.centroids, out.assignments);
    return out;
}

IndexList nearest_to_centroids(const Matrix& points, const Clustering& clustering) {
    if (static_cast<Index>(clustering.assignments.size()) != points.rows())
        throw std::invalid_argument("nearest_to_centroids: clustering does not match points");
    const int k = clustering.k();
    std::vector<Index> best(static_cast<std::size_t>(k), -1);
    std::vector<double> best_d(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    for (Index i = 0; i < points.rows(); ++i) {
        const int c = clustering.assignments[i];
        const double dd = sq_dist(points, i, clustering.centroids, c);
        if (dd < best_d[c]) {
            best_d[c] = dd;
            best[c] = i;
        }
    }
    IndexList out;
    for (Index b : best)
        if (b >= 0 && std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
    return out;
}

IndexList greedy_k_center(const Matrix& points, const IndexList& existing, int b) {
    const Index m = points.rows();
    if (b < 0 || b > m - static_cast<Index>(existing.size()))
        throw std::invalid_argument(fmt::format("greedy_k_center: b={} exceeds the {} available points", b,
                                                m - static_cast<Index>(existing.size())));
    std::vector<double> mind(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<std::size_t>(m), 0);
    auto add = [&](Index s) {
        chosen[s] = 1;
        for (Index j = 0; j < m; ++j) mind[j] = std::min(mind[j], sq_dist(points, j, points, s));
    };
    for (Index e : existing) {
        if (e < 0 || e >= m) throw std::invalid_argument("greedy_k_center: existing index out of range");
        add(e);
    }

    IndexList picks;
    picks.reserve(static_cast<std::size_t>(b));
    if (b == 0) return picks;
    if (existing.empty()) {
        const Eigen::RowVectorXd mean = points.colwise().mean();
        Index first = 0;
        double far = -1.0;
        for (Index i = 0; i < m; ++i) {
            const double dd = (points.row(i) - mean).squaredNorm();
            if (dd > far) {
                far = dd;
                first = i;
            }
        }
        picks.push_back(first);
        add(first);
    }
    while (static_cast<int>(picks.size()) < b) {
        Index best = -1;
        double best_d = -1.0;
        for (Index j = 0; j < m; ++j) {
            if (chosen[j]) continue;
            if (mind[j] > best_d) {
                best_d = mind[j];
                best = j;
            }
        }
        picks.push_back(best);
        add(best);
    }
    return picks;
}

double covering_radius(const Matrix& points, const IndexList& centers) {
    if (centers.empty()) throw std::invalid_argument("covering_radius: no centres");
    double worst = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index c : centers) best = std::min(best, sq_dist(points, i, points, c));
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

}  // namespace alcove
