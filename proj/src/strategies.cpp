#include "alcove/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "alcove/geometry.hpp"

namespace alcove {

namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 12> kNames = {{
    {StrategyKind::random, "random"},
    {StrategyKind::uncertainty, "uncertainty"},
    {StrategyKind::entropy, "entropy"},
    {StrategyKind::margins, "margins"},
    {StrategyKind::bald, "bald"},
    {StrategyKind::powerbald, "powerbald"},
    {StrategyKind::coreset, "coreset"},
    {StrategyKind::badge, "badge"},
    {StrategyKind::alfamix, "alfamix"},
    {StrategyKind::typiclust, "typiclust"},
    {StrategyKind::probcover, "probcover"},
    {StrategyKind::dropquery, "dropquery"},
}};

constexpr int kDropQueryFallbackMultiplier = 50;

std::size_t clamp_budget(int b, std::size_t available) {
    return std::min(available, static_cast<std::size_t>(std::max(b, 0)));
}

bool contains(const IndexList& v, Index x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

std::string_view to_string(StrategyKind kind) {
    for (const auto& [k, name] : kNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
    for (const auto& [k, n] : kNames)
        if (n == name) return k;
    return std::nullopt;
}

const std::vector<StrategyKind>& all_strategies() {
    static const std::vector<StrategyKind> all = [] {
        std::vector<StrategyKind> v;
        for (const auto& entry : kNames) v.push_back(entry.first);
        return v;
    }();
    return all;
}

bool supports_diversify(StrategyKind kind) {
    return kind == StrategyKind::uncertainty || kind == StrategyKind::entropy || kind == StrategyKind::margins ||
           kind == StrategyKind::bald;
}

std::string QuerySpec::id() const {
    std::string s(to_string(kind));
    if (diversify) s += "+div";
    return s;
}

// ---------------------------------------------------------------------------
// ALFA-Mix

AlfaMixCandidates alfamix_candidates(const Matrix& features, const LinearClassifier& clf, const IndexList& labeled,
                                     std::span<const int> labeled_labels, const IndexList& unlabeled,
                                     double eps_scale) {
    if (labeled.empty()) throw StrategyUnavailable("alfamix needs labeled anchors; initialise the pool first");
    if (labeled.size() != labeled_labels.size()) throw std::invalid_argument("alfamix: labeled/labels size mismatch");
    const Index d = features.cols();
    const int c = clf.num_classes();

    Matrix sums = Matrix::Zero(c, d);
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        sums.row(labeled_labels[i]) += features.row(labeled[i]);
        ++counts[labeled_labels[i]];
    }
    std::vector<Eigen::RowVectorXd> anchors;
    for (int k = 0; k < c; ++k)
        if (counts[k] > 0) anchors.emplace_back(sums.row(k) / static_cast<double>(counts[k]));

    const double eps = eps_scale / std::sqrt(static_cast<double>(d));
    const Matrix z = gather_rows(features, unlabeled);
    const Matrix probs = clf.predict_proba(z);
    const Matrix& w = clf.weights();

    AlfaMixCandidates out;
    out.flip_counts.assign(unlabeled.size(), 0);
    Eigen::RowVectorXd mix(d), alpha(d);
    for (Index u = 0; u < z.rows(); ++u) {
        const int pred = argmax_row(probs, u);
        // d CE(pred) / dz for the linear head.
        Eigen::RowVectorXd residual = probs.row(u);
        residual(pred) -= 1.0;
        const Eigen::RowVectorXd grad = residual * w;
        const double gnorm = grad.norm();
        for (const auto& anchor : anchors) {
            const Eigen::RowVectorXd diff = anchor - z.row(u);
            const double dnorm = diff.norm();
            for (Index t = 0; t < d; ++t) {
                double a = 0.0;
                if (gnorm > 0.0 && std::abs(diff(t)) > 1e-12) a = eps * dnorm * grad(t) / (gnorm * diff(t));
                alpha(t) = std::clamp(a, 0.0, eps);
            }
            mix = z.row(u) + alpha.cwiseProduct(diff);
            Eigen::RowVectorXd logit = mix * w.transpose() + clf.bias().transpose();
            Index best = 0;
            for (Index k = 1; k < logit.size(); ++k)
                if (logit(k) > logit(best)) best = k;
            if (best != pred) ++out.flip_counts[u];
        }
    }
    return out;
}

IndexList query_alfamix(const Matrix& features, const LinearClassifier& clf, const IndexList& labeled,
                        std::span<const int> labeled_labels, const IndexList& unlabeled, int b, double eps_scale,
                        std::uint64_t seed) {
    const AlfaMixCandidates cand = alfamix_candidates(features, clf, labeled, labeled_labels, unlabeled, eps_scale);
    const std::size_t target = clamp_budget(b, unlabeled.size());

    IndexList candidates;
    for (std::size_t i = 0; i < unlabeled.size(); ++i)
        if (cand.flip_counts[i] > 0) candidates.push_back(unlabeled[i]);

    IndexList out;
    if (!candidates.empty() && target > 0) {
        const Matrix pts = gather_rows(features, candidates);
        const int k = static_cast<int>(std::min(target, candidates.size()));
        for (Index p : nearest_to_centroids(pts, kmeans(pts, k, derive_seed(seed, "alfamix.kmeans"))))
            out.push_back(candidates[p]);
    }

    // Top up: remaining candidates by flip count, then the pool by entropy.
    std::vector<std::size_t> order(unlabeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const Vector ent = score_entropy(clf.predict_proba(gather_rows(features, unlabeled)));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) {
        if (cand.flip_counts[a] != cand.flip_counts[b2]) return cand.flip_counts[a] > cand.flip_counts[b2];
        const bool is_cand = cand.flip_counts[a] > 0;
        if (!is_cand && ent(a) != ent(b2)) return ent(a) > ent(b2);
        return unlabeled[a] < unlabeled[b2];
    });
    for (std::size_t i = 0; i < order.size() && out.size() < target; ++i)
        if (!contains(out, unlabeled[order[i]])) out.push_back(unlabeled[order[i]]);
    return out;
}

// ---------------------------------------------------------------------------
// TypiClust

double typicality(const Matrix& points, Index idx, int k) {
    const Index m = points.rows();
    if (k < 1 || k >= m) throw std::invalid_argument(fmt::format("typicality: need 1 <= k < M (k={}, M={})", k, m));
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(m - 1));
    for (Index j = 0; j < m; ++j)
        if (j != idx) d.push_back(std::sqrt(sq_dist(points, idx, points, j)));
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    double mean = 0.0;
    for (int t = 0; t < k; ++t) mean += d[t];
    mean /= static_cast<double>(k);
    return 1.0 / (mean + 1e-12);
}

IndexList query_typiclust(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b,
                          int max_clusters, int knn, std::uint64_t seed) {
    const std::size_t target = clamp_budget(b, unlabeled.size());
    if (target == 0) return {};
    IndexList pool = labeled;
    pool.insert(pool.end(), unlabeled.begin(), unlabeled.end());
    std::sort(pool.begin(), pool.end());
    IndexList labeled_sorted = labeled;
    std::sort(labeled_sorted.begin(), labeled_sorted.end());

    const Matrix pts = gather_rows(features, pool);
    const auto k = static_cast<int>(std::min<std::size_t>(
        {labeled.size() + target, static_cast<std::size_t>(std::max(max_clusters, 1)), pool.size()}));
    const Clustering cl = kmeans(pts, k, derive_seed(seed, "typiclust.kmeans"));

    std::vector<IndexList> members(static_cast<std::size_t>(k));
    std::vector<int> labeled_count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const int c = cl.assignments[i];
        members[c].push_back(static_cast<Index>(i));
        if (std::binary_search(labeled_sorted.begin(), labeled_sorted.end(), pool[i])) ++labeled_count[c];
    }

    std::vector<int> ranking(static_cast<std::size_t>(k));
    std::iota(ranking.begin(), ranking.end(), 0);
    std::sort(ranking.begin(), ranking.end(), [&](int a, int c2) {
        if (labeled_count[a] != labeled_count[c2]) return labeled_count[a] < labeled_count[c2];
        if (members[a].size() != members[c2].size()) return members[a].size() > members[c2].size();
        return a < c2;
    });

    // Typicality is measured inside each cluster; unlabeled members only are
    // eligible, sorted most typical first.
    std::vector<IndexList> eligible(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        const auto& mem = members[c];
        const Matrix cpts = gather_rows(pts, mem);
        const int kk = std::min<int>(knn, static_cast<int>(mem.size()) - 1);
        std::vector<std::pair<double, Index>> scored;
        for (std::size_t t = 0; t < mem.size(); ++t) {
            const Index global = pool[mem[t]];
            if (std::binary_search(labeled_sorted.begin(), labeled_sorted.end(), global)) continue;
            const double typ = kk >= 1 ? typicality(cpts, static_cast<Index>(t), kk) : 0.0;
            scored.emplace_back(-typ, global);
        }
        std::sort(scored.begin(), scored.end());
        for (const auto& s : scored) eligible[c].push_back(s.second);
    }

    // Walk the ranking; if clusters run out before the budget, walk it again
    // taking each cluster's next most typical member.
    IndexList out;
    for (std::size_t round = 0; out.size() < target; ++round) {
        bool any = false;
        for (int c : ranking) {
            if (out.size() >= target) break;
            if (round < eligible[c].size()) {
                out.push_back(eligible[c][round]);
                any = true;
            }
        }
        if (!any) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// ProbCover

std::vector<double> delta_grid(const Matrix& points, std::uint64_t seed) {
    const Index m = points.rows();
    if (m < 2) throw std::invalid_argument("delta_grid: need at least two points");
    constexpr int kPairs = 2000;
    constexpr int kGrid = 64;
    Rng rng(seed);
    std::vector<double> d;
    d.reserve(kPairs);
    for (int t = 0; t < kPairs; ++t) {
        const Index i = rng.uniform_index(m);
        Index j = rng.uniform_index(m - 1);
        if (j >= i) ++j;
        d.push_back(std::sqrt(sq_dist(points, i, points, j)));
    }
    std::sort(d.begin(), d.end());
    auto pct = [&](double q) { return d[static_cast<std::size_t>(std::floor(q * static_cast<double>(d.size() - 1)))]; };
    double lo = pct(0.01);
    const double hi = pct(0.99);
    if (!(lo > 0.0)) {
        const auto pos = std::upper_bound(d.begin(), d.end(), 0.0);
        lo = pos == d.end() ? 0.0 : *pos;
    }
    if (!(lo > 0.0) || !(hi > lo)) return {std::max(hi, 0.0)};
    std::vector<double> grid(kGrid);
    const double step = std::log(hi / lo) / (kGrid - 1);
    for (int g = 0; g < kGrid; ++g) grid[g] = lo * std::exp(step * g);
    grid.back() = hi;
    return grid;
}

namespace {

// Distance from each point to the nearest point with a different label.
std::vector<double> impurity_radius(const Matrix& points, const std::vector<int>& labels) {
    std::vector<double> r(static_cast<std::size_t>(points.rows()), std::numeric_limits<double>::infinity());
    for (Index i = 0; i < points.rows(); ++i)
        for (Index j = 0; j < points.rows(); ++j)
            if (labels[i] != labels[j]) r[i] = std::min(r[i], sq_dist(points, i, points, j));
    for (double& v : r) v = std::sqrt(v);
    return r;
}

double purity_from_radius(const std::vector<double>& r, double delta) {
    std::size_t pure = 0;
    for (double v : r)
        if (v > delta) ++pure;
    return r.empty() ? 1.0 : static_cast<double>(pure) / static_cast<double>(r.size());
}

}  // namespace

double purity_at(const Matrix& points, const std::vector<int>& pseudo_labels, double delta) {
    if (static_cast<Index>(pseudo_labels.size()) != points.rows()) throw std::invalid_argument("purity_at: size mismatch");
    return purity_from_radius(impurity_radius(points, pseudo_labels), delta);
}

double estimate_delta(const Matrix& points, int num_clusters, double purity_threshold, std::uint64_t seed,
                      std::optional<std::vector<double>> grid) {
    std::vector<double> radii = grid ? std::move(*grid) : delta_grid(points, derive_seed(seed, "probcover.grid"));
    if (radii.empty()) throw std::invalid_argument("estimate_delta: empty grid");
    std::sort(radii.begin(), radii.end());
    const int k = std::clamp<int>(num_clusters, 1, static_cast<int>(points.rows()));
    const Clustering cl = kmeans(points, k, derive_seed(seed, "probcover.kmeans"));
    const std::vector<double> r = impurity_radius(points, cl.assignments);
    for (auto it = radii.rbegin(); it != radii.rend(); ++it)
        if (purity_from_radius(r, *it) >= purity_threshold) return *it;
    return radii.front();
}

IndexList query_probcover(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b,
                          double delta) {
    const std::size_t target = clamp_budget(b, unlabeled.size());
    if (target == 0) return {};
    IndexList pool = labeled;
    pool.insert(pool.end(), unlabeled.begin(), unlabeled.end());
    std::sort(pool.begin(), pool.end());
    const auto n = static_cast<Index>(pool.size());
    const Matrix pts = gather_rows(features, pool);
    const double d2 = delta * delta;

    std::vector<IndexList> ball(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (sq_dist(pts, i, pts, j) <= d2) ball[i].push_back(j);

    std::vector<char> covered(static_cast<std::size_t>(n), 0), is_candidate(static_cast<std::size_t>(n), 0);
    IndexList unl_sorted = unlabeled;
    std::sort(unl_sorted.begin(), unl_sorted.end());
    for (Index i = 0; i < n; ++i) {
        if (std::binary_search(unl_sorted.begin(), unl_sorted.end(), pool[i])) {
            is_candidate[i] = 1;
        } else {
            for (Index j : ball[i]) covered[j] = 1;
        }
    }

    IndexList out;
    while (out.size() < target) {
        Index best = -1;
        long best_gain = -1;
        for (Index i = 0; i < n; ++i) {
            if (!is_candidate[i]) continue;
            long gain = 0;
            for (Index j : ball[i]) gain += covered[j] ? 0 : 1;
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        is_candidate[best] = 0;
        for (Index j : ball[best]) covered[j] = 1;
        out.push_back(pool[best]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// DropQuery

DropQueryCandidates dropquery_candidates(const LinearClassifier& clf, const Matrix& points, int m, double rho,
                                         std::uint64_t mask_seed, bool literal) {
    if (m < 1) throw std::invalid_argument("dropquery: M must be >= 1");
    DropQueryCandidates out;
    out.base_prediction = clf.predict(points);
    const auto mc = mc_dropout_proba(clf, points, m, rho, mask_seed);
    out.agreements.assign(static_cast<std::size_t>(points.rows()), 0);
    out.in_candidate_set.assign(static_cast<std::size_t>(points.rows()), 0);
    for (Index i = 0; i < points.rows(); ++i) {
        for (const Matrix& p : mc)
            if (argmax_row(p, i) == out.base_prediction[i]) ++out.agreements[i];
        const int n = out.agreements[i];
        out.in_candidate_set[i] = literal ? (2 * n > m) : (2 * (m - n) > m);
    }
    return out;
}

QueryResult dropquery(const Matrix& features, const LinearClassifier& clf, const IndexList& unlabeled, int b, int m,
                      double rho, std::uint64_t seed, bool literal) {
    QueryResult res;
    const std::size_t target = clamp_budget(b, unlabeled.size());
    const Matrix z = gather_rows(features, unlabeled);
    const DropQueryCandidates cand =
        dropquery_candidates(clf, z, m, rho, derive_seed(seed, "dropquery.masks"), literal);

    IndexList candidates;
    for (std::size_t i = 0; i < unlabeled.size(); ++i)
        if (cand.in_candidate_set[i]) candidates.push_back(unlabeled[i]);
    res.candidate_fraction =
        unlabeled.empty() ? 0.0 : static_cast<double>(candidates.size()) / static_cast<double>(unlabeled.size());
    if (target == 0) return res;

    const Vector margin = score_margin(clf.predict_proba(z));
    auto margin_of = [&](Index global) {
        const auto pos = std::lower_bound(unlabeled.begin(), unlabeled.end(), global) - unlabeled.begin();
        return margin(pos);
    };

    if (!candidates.empty()) {
        const Matrix pts = gather_rows(features, candidates);
        const int k = static_cast<int>(std::min(target, candidates.size()));
        for (Index p : nearest_to_centroids(pts, kmeans(pts, k, derive_seed(seed, "dropquery.kmeans"))))
            res.selected.push_back(candidates[p]);
        // Collapsed clusters: top up from the candidate set by margin.
        if (res.selected.size() < std::min(target, candidates.size())) {
            std::vector<double> s;
            for (Index c : candidates) s.push_back(margin_of(c));
            for (Index c : select_topb(s, candidates, static_cast<int>(candidates.size()))) {
                if (res.selected.size() >= std::min(target, candidates.size())) break;
                if (!contains(res.selected, c)) res.selected.push_back(c);
            }
        }
    }

    if (res.selected.size() < target) {
        IndexList rest;
        std::vector<double> s;
        for (std::size_t i = 0; i < unlabeled.size(); ++i) {
            if (contains(res.selected, unlabeled[i])) continue;
            rest.push_back(unlabeled[i]);
            s.push_back(margin(static_cast<Index>(i)));
        }
        const int need = static_cast<int>(target - res.selected.size());
        for (Index p : diversify(s, features, rest, need, kDropQueryFallbackMultiplier,
                                 derive_seed(seed, "dropquery.fallback"), /*keep_boundary_ties=*/true))
            res.selected.push_back(p);
    }
    return res;
}

// ---------------------------------------------------------------------------

QueryResult run_query(const QuerySpec& spec, const QueryContext& ctx) {
    if (spec.diversify && !supports_diversify(spec.kind))
        throw std::invalid_argument(fmt::format("strategy '{}' does not support diversification", to_string(spec.kind)));
    if (ctx.labeled.size() != ctx.labeled_labels.size())
        throw std::invalid_argument("run_query: labeled/labeled_labels size mismatch");
    const int b = static_cast<int>(clamp_budget(ctx.budget, ctx.unlabeled.size()));
    QueryResult res;
    if (b == 0 && spec.kind != StrategyKind::dropquery) return res;

    auto score_based = [&](const Vector& scores) {
        const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
        if (spec.diversify)
            return diversify(s, ctx.features, ctx.unlabeled, b, spec.diversify->multiplier,
                             derive_seed(ctx.seed, "diversify"));
        return select_topb(s, ctx.unlabeled, b);
    };
    auto base_probs = [&]() {
        const Matrix z = gather_rows(ctx.features, ctx.unlabeled);
        if (spec.diversify && spec.diversify->inference_dropout)
            return mc_dropout_proba(ctx.classifier, z, 1, spec.dropout_rho, derive_seed(ctx.seed, "inference-dropout"))
                .front();
        return ctx.classifier.predict_proba(z);
    };
    auto bald_scores = [&]() {
        const Matrix z = gather_rows(ctx.features, ctx.unlabeled);
        return score_bald(
            mc_dropout_proba(ctx.classifier, z, spec.mc_samples, spec.dropout_rho, derive_seed(ctx.seed, "bald.mc")));
    };

    switch (spec.kind) {
        case StrategyKind::random: {
            Rng rng(derive_seed(ctx.seed, "random"));
            res.selected = sample_without_replacement(ctx.unlabeled, b, rng);
            break;
        }
        case StrategyKind::uncertainty:
            res.selected = score_based(score_uncertainty(base_probs()));
            break;
        case StrategyKind::entropy:
            res.selected = score_based(score_entropy(base_probs()));
            break;
        case StrategyKind::margins:
            res.selected = score_based(score_margin(base_probs()));
            break;
        case StrategyKind::bald:
            res.selected = score_based(bald_scores());
            break;
        case StrategyKind::powerbald: {
            const Vector s = bald_scores();
            Rng rng(derive_seed(ctx.seed, "powerbald"));
            res.selected = query_powerbald(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                                           ctx.unlabeled, b, spec.power_beta, rng);
            break;
        }
        case StrategyKind::coreset:
            res.selected = query_coreset(ctx.features, ctx.labeled, ctx.unlabeled, b);
            break;
        case StrategyKind::badge: {
            Rng rng(derive_seed(ctx.seed, "badge"));
            res.selected = query_badge(ctx.features, ctx.classifier, ctx.unlabeled, b, rng);
            break;
        }
        case StrategyKind::alfamix:
            res.selected = query_alfamix(ctx.features, ctx.classifier, ctx.labeled, ctx.labeled_labels, ctx.unlabeled,
                                         b, spec.alfamix_eps_scale, ctx.seed);
            break;
        case StrategyKind::typiclust:
            res.selected = query_typiclust(ctx.features, ctx.labeled, ctx.unlabeled, b, spec.typiclust_max_clusters,
                                           spec.typiclust_knn, ctx.seed);
            break;
        case StrategyKind::probcover: {
            double delta = 0.0;
            if (spec.probcover_delta) {
                delta = *spec.probcover_delta;
            } else {
                IndexList pool = ctx.labeled;
                pool.insert(pool.end(), ctx.unlabeled.begin(), ctx.unlabeled.end());
                std::sort(pool.begin(), pool.end());
                delta = estimate_delta(gather_rows(ctx.features, pool), ctx.num_classes, spec.probcover_purity,
                                       derive_seed(ctx.seed, "probcover.delta"));
            }
            res.selected = query_probcover(ctx.features, ctx.labeled, ctx.unlabeled, b, delta);
            break;
        }
        case StrategyKind::dropquery:
            res = dropquery(ctx.features, ctx.classifier, ctx.unlabeled, b, spec.dq_m, spec.dropout_rho, ctx.seed,
                            spec.dq_literal);
            break;
    }
    return res;
}

}  // namespace alcove
