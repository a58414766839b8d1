#include <algorithm>
#include <cmath>
#include <numeric>

#include "alcove/geometry.hpp"
#include "alcove/strategies.hpp"

namespace alcove {

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

namespace {

std::span<const double> row_span(const Matrix& m, Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

Vector score_uncertainty(const Matrix& probs) {
    Vector s(probs.rows());
    for (Index i = 0; i < probs.rows(); ++i) s(i) = 1.0 - probs.row(i).maxCoeff();
    return s;
}

Vector score_entropy(const Matrix& probs) {
    Vector s(probs.rows());
    for (Index i = 0; i < probs.rows(); ++i) s(i) = entropy(row_span(probs, i));
    return s;
}

Vector score_margin(const Matrix& probs) {
    Vector s(probs.rows());
    for (Index i = 0; i < probs.rows(); ++i) {
        double top = -1.0, second = -1.0;
        for (Index k = 0; k < probs.cols(); ++k) {
            const double v = probs(i, k);
            if (v > top) {
                second = top;
                top = v;
            } else if (v > second) {
                second = v;
            }
        }
        s(i) = probs.cols() < 2 ? -1.0 : -(top - second);
    }
    return s;
}

Vector score_bald(const std::vector<Matrix>& mc_probs) {
    if (mc_probs.empty()) throw std::invalid_argument("score_bald: need at least one MC sample");
    const Index m = mc_probs.front().rows();
    const Index c = mc_probs.front().cols();
    const auto samples = static_cast<double>(mc_probs.size());
    Vector s(m);
    std::vector<double> mean(static_cast<std::size_t>(c));
    for (Index i = 0; i < m; ++i) {
        std::fill(mean.begin(), mean.end(), 0.0);
        double mean_h = 0.0;
        for (const Matrix& p : mc_probs) {
            for (Index k = 0; k < c; ++k) mean[k] += p(i, k);
            mean_h += entropy(row_span(p, i));
        }
        for (double& v : mean) v /= samples;
        s(i) = std::max(0.0, entropy(mean) - mean_h / samples);
    }
    return s;
}

namespace {

// Positions into `unlabeled` sorted by score descending, then index ascending.
std::vector<std::size_t> rank_by_score(std::span<const double> scores, const IndexList& unlabeled) {
    std::vector<std::size_t> order(unlabeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return unlabeled[a] < unlabeled[b];
    });
    return order;
}

}  // namespace

IndexList select_topb(std::span<const double> scores, const IndexList& unlabeled, int b) {
    if (scores.size() != unlabeled.size()) throw std::invalid_argument("select_topb: scores/unlabeled size mismatch");
    const auto order = rank_by_score(scores, unlabeled);
    const auto n = std::min(order.size(), static_cast<std::size_t>(std::max(b, 0)));
    IndexList out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(unlabeled[order[i]]);
    return out;
}

IndexList diversify(std::span<const double> scores, const Matrix& features, const IndexList& unlabeled, int b,
                    int multiplier, std::uint64_t seed, bool keep_boundary_ties) {
    if (multiplier < 1) throw std::invalid_argument("diversify: multiplier must be >= 1");
    if (scores.size() != unlabeled.size()) throw std::invalid_argument("diversify: scores/unlabeled size mismatch");
    const auto order = rank_by_score(scores, unlabeled);
    const std::size_t target = std::min(order.size(), static_cast<std::size_t>(std::max(b, 0)));
    if (target == 0) return {};

    std::size_t len = std::min(order.size(), static_cast<std::size_t>(multiplier) * target);
    if (keep_boundary_ties)
        while (len < order.size() && scores[order[len]] == scores[order[len - 1]]) ++len;

    IndexList shortlist;
    shortlist.reserve(len);
    for (std::size_t i = 0; i < len; ++i) shortlist.push_back(unlabeled[order[i]]);

    const Matrix pts = gather_rows(features, shortlist);
    const Clustering cl = kmeans(pts, static_cast<int>(target), seed);
    IndexList out;
    for (Index p : nearest_to_centroids(pts, cl)) out.push_back(shortlist[p]);
    for (std::size_t i = 0; i < shortlist.size() && out.size() < target; ++i)
        if (std::find(out.begin(), out.end(), shortlist[i]) == out.end()) out.push_back(shortlist[i]);
    return out;
}

IndexList query_powerbald(std::span<const double> bald_scores, const IndexList& unlabeled, int b, double beta,
                          Rng& rng) {
    if (bald_scores.size() != unlabeled.size()) throw std::invalid_argument("powerbald: size mismatch");
    constexpr double kFloor = 1e-12;
    const std::size_t n = unlabeled.size();
    const auto target = std::min(n, static_cast<std::size_t>(std::max(b, 0)));
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(std::max(bald_scores[i], 0.0) + kFloor, beta);

    IndexList out;
    out.reserve(target);
    std::vector<char> taken(n, 0);
    while (out.size() < target) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i]) total += w[i];
        const double u = rng.uniform() * total;
        double cum = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            cum += w[i];
            pick = i;
            if (cum > u) break;
        }
        taken[pick] = 1;
        out.push_back(unlabeled[pick]);
    }
    return out;
}

IndexList query_coreset(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b) {
    // Ascending global order so positional ties resolve to the smaller index.
    IndexList pool = labeled;
    pool.insert(pool.end(), unlabeled.begin(), unlabeled.end());
    std::sort(pool.begin(), pool.end());
    IndexList labeled_sorted = labeled;
    std::sort(labeled_sorted.begin(), labeled_sorted.end());
    IndexList existing;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (std::binary_search(labeled_sorted.begin(), labeled_sorted.end(), pool[i]))
            existing.push_back(static_cast<Index>(i));

    const int target = static_cast<int>(std::min<std::size_t>(unlabeled.size(), static_cast<std::size_t>(std::max(b, 0))));
    IndexList out;
    for (Index p : greedy_k_center(gather_rows(features, pool), existing, target)) out.push_back(pool[p]);
    return out;
}

double badge_sq_dist(std::span<const double> z_i, std::span<const double> p_i, std::span<const double> z_j,
                     std::span<const double> p_j) {
    if (z_i.size() != z_j.size() || p_i.size() != p_j.size())
        throw std::invalid_argument("badge_sq_dist: dimension mismatch");
    auto dot = [](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) s += a[t] * b[t];
        return s;
    };
    const double v = dot(z_i, z_i) * dot(p_i, p_i) + dot(z_j, z_j) * dot(p_j, p_j) - 2.0 * dot(z_i, z_j) * dot(p_i, p_j);
    return std::max(0.0, v);
}

Matrix badge_residuals(const Matrix& probs) {
    Matrix p = probs;
    for (Index i = 0; i < p.rows(); ++i) p(i, argmax_row(probs, i)) -= 1.0;
    return p;
}

IndexList query_badge(const Matrix& features, const LinearClassifier& clf, const IndexList& unlabeled, int b,
                      Rng& rng) {
    const Matrix z = gather_rows(features, unlabeled);
    const Matrix p = badge_residuals(clf.predict_proba(z));
    auto dist2 = [&](Index i, Index j) {
        return badge_sq_dist(row_span(z, i), row_span(p, i), row_span(z, j), row_span(p, j));
    };
    const int target = static_cast<int>(std::min<std::size_t>(unlabeled.size(), static_cast<std::size_t>(std::max(b, 0))));
    IndexList out;
    for (Index s : kmeanspp_seed_with(z.rows(), target, rng, dist2)) out.push_back(unlabeled[s]);
    return out;
}

}  // namespace alcove
