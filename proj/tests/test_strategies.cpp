#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "alcove/geometry.hpp"
#include "alcove/strategies.hpp"
#include "oracles.hpp"

using namespace alcove;

namespace {

IndexList iota_list(Index n, Index start = 0) {
    IndexList v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), start);
    return v;
}

Matrix col(std::initializer_list<double> xs) {
    Matrix m(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

double naive_typicality(const Matrix& p, Index i, int k) {
    std::vector<double> d;
    for (Index j = 0; j < p.rows(); ++j)
        if (j != i) d.push_back(std::sqrt(oracle::sqdist(p, i, p, j)));
    std::sort(d.begin(), d.end());
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += d[t];
    return 1.0 / (s / k + 1e-12);
}

// Two tight blobs around (0,0) and (gap,0).
Matrix two_blobs(Index per_blob, double gap, std::uint64_t seed, double spread = 0.1) {
    Matrix p = oracle::random_matrix(2 * per_blob, 2, seed, spread);
    for (Index i = per_blob; i < 2 * per_blob; ++i) p(i, 0) += gap;
    return p;
}

struct Instance {
    EmbeddingDataset ds;
    LinearClassifier clf;
    IndexList labeled;
    std::vector<int> labeled_labels;
    IndexList unlabeled;
};

Instance small_instance(std::uint64_t seed) {
    Instance in;
    in.ds = generate_synthetic(4, 30, 5, 3.0, seed);
    const auto& train_idx = in.ds.train_indices;
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        if (i % 8 == 0) {
            in.labeled.push_back(train_idx[i]);
            in.labeled_labels.push_back(in.ds.labels[train_idx[i]]);
        } else {
            in.unlabeled.push_back(train_idx[i]);
        }
    }
    TrainConfig cfg;
    cfg.epochs = 50;
    in.clf = train(gather_rows(in.ds.features, in.labeled), in.labeled_labels, 4, cfg, seed);
    return in;
}

}  // namespace

TEST_CASE("badge trace equals k-means++ on materialized gradient embeddings") {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        Rng shape(trial);
        const Index d = 2 + shape.uniform_index(7), c = 2 + shape.uniform_index(3), n = 10 + shape.uniform_index(21);
        LinearClassifier clf(oracle::random_matrix(c, d, 10 + trial), Vector::Zero(c));
        Matrix f = oracle::random_matrix(n, d, 20 + trial);
        IndexList unl = iota_list(n, 0);
        const int b = static_cast<int>(1 + shape.uniform_index(n - 1));

        Matrix res = badge_residuals(clf.predict_proba(f));
        Matrix g(n, c * d);
        for (Index i = 0; i < n; ++i) {
            Matrix outer = f.row(i).transpose() * res.row(i);
            g.row(i) = Eigen::Map<Eigen::RowVectorXd>(outer.data(), c * d);
        }
        Rng r1(300 + trial), r2(300 + trial);
        CHECK(query_badge(f, clf, unl, b, r1) == kmeanspp_seed(g, b, r2));
    }
}

TEST_CASE("badge never re-picks a zero-distance gradient embedding") {
    // Rows 1..3 are saturated (exactly one-hot, zero residual), row 0 is
    // uncertain. Seeded at a zero embedding, the others weigh nothing.
    Matrix w(2, 1);
    w << 1000, -1000;
    Vector bias(2);
    bias << -1000, 1000;
    LinearClassifier clf(w, bias);
    Matrix f = col({1.0, 3.0, 4.0, -2.0});
    CHECK(badge_residuals(clf.predict_proba(f)).row(1).norm() == 0.0);
    int seeded_zero = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        auto picks = query_badge(f, clf, iota_list(4), 2, rng);
        if (picks[0] == 0) continue;
        ++seeded_zero;
        CHECK(picks[1] == 0);
    }
    CHECK(seeded_zero > 0);
    Rng rng(1);
    auto all = query_badge(f, clf, iota_list(4), 4, rng);
    std::sort(all.begin(), all.end());
    CHECK(all == iota_list(4));
}

TEST_CASE("coreset uses labeled points as centres") {
    Matrix f = col({0, 1, 10});
    CHECK(query_coreset(f, {0}, {1, 2}, 1) == IndexList{2});
    auto all = query_coreset(f, {0}, {1, 2}, 2);
    std::sort(all.begin(), all.end());
    CHECK(all == IndexList{1, 2});
}

TEST_CASE("alfa-mix flips exactly where the interpolation crosses the boundary") {
    // Class 0 iff z > 0. The anchor for class 1 sits at -1; the clamped
    // first-order step is alpha = eps, so z flips iff z - eps (z + 1) < 0.
    Matrix w(2, 1);
    w << 1, -1;
    LinearClassifier clf(w, Vector::Zero(2));
    Matrix f = col({-1.0, 0.02, 0.1, 0.2, 0.24, 0.26, 0.5, 5.0});
    const double eps = 0.2;
    auto cand = alfamix_candidates(f, clf, {0}, std::vector<int>{1}, iota_list(7, 1), eps);
    for (Index u = 1; u < 8; ++u) {
        const double z = f(u, 0);
        CHECK((cand.flip_counts[u - 1] > 0) == (z - eps * (z + 1.0) < 0.0));
    }
    // The only candidate near the boundary is what a budget of 1 returns.
    CHECK(query_alfamix(f, clf, {0}, std::vector<int>{1}, {1, 7}, 1, eps, 3) == IndexList{1});

    auto none = alfamix_candidates(f, clf, {0}, std::vector<int>{1}, iota_list(7, 1), 0.0);
    for (int c : none.flip_counts) CHECK(c == 0);
}

TEST_CASE("alfa-mix falls back to entropy order when nothing flips") {
    LinearClassifier zero = LinearClassifier::zeros(3, 2);
    Matrix f = oracle::random_matrix(10, 2, 4);
    CHECK(query_alfamix(f, zero, {0, 1}, std::vector<int>{0, 2}, iota_list(8, 2), 3, 0.2, 1) == IndexList{2, 3, 4});
    CHECK_THROWS_AS(query_alfamix(f, zero, {}, std::vector<int>{}, iota_list(10), 3, 0.2, 1), StrategyUnavailable);
}

TEST_CASE("typicality") {
    Matrix tri(3, 2);
    tri << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
    CHECK(typicality(tri, 0, 2) == doctest::Approx(typicality(tri, 1, 2)));
    CHECK(typicality(tri, 1, 2) == doctest::Approx(typicality(tri, 2, 2)));

    Matrix dup = col({1.0, 1.0, 5.0});
    const double t = typicality(dup, 0, 1);
    CHECK(std::isfinite(t));
    CHECK(t == doctest::Approx(1e12));

    Matrix r = oracle::random_matrix(30, 4, 9);
    for (Index i = 0; i < 30; ++i) CHECK(typicality(r, i, 20) == doctest::Approx(naive_typicality(r, i, 20)).epsilon(1e-12));
}

TEST_CASE("typiclust takes the densest point of each blob") {
    Matrix f = two_blobs(15, 50.0, 3);
    auto picks = query_typiclust(f, {}, iota_list(30), 2, 500, 20, 7);
    REQUIRE(picks.size() == 2);
    std::set<Index> got(picks.begin(), picks.end());
    for (Index blob = 0; blob < 2; ++blob) {
        Matrix pts = f.middleRows(blob * 15, 15);
        Index best = 0;
        for (Index i = 1; i < 15; ++i)
            if (naive_typicality(pts, i, 14) > naive_typicality(pts, best, 14)) best = i;
        CHECK(got.count(blob * 15 + best) == 1);
    }
}

TEST_CASE("typiclust replays from k-means and naive typicality") {
    auto in = small_instance(5);
    const int b = 4, knn = 6;
    auto got = query_typiclust(in.ds.features, in.labeled, in.unlabeled, b, 500, knn, 11);
    CHECK(got == query_typiclust(in.ds.features, in.labeled, in.unlabeled, b, 500, knn, 11));

    IndexList pool = in.labeled;
    pool.insert(pool.end(), in.unlabeled.begin(), in.unlabeled.end());
    std::sort(pool.begin(), pool.end());
    const Matrix pts = gather_rows(in.ds.features, pool);
    const int k = static_cast<int>(in.labeled.size()) + b;
    auto cl = kmeans(pts, k, derive_seed(11, "typiclust.kmeans"));
    std::set<Index> lab(in.labeled.begin(), in.labeled.end());
    std::vector<int> nlab(k, 0), size(k, 0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        ++size[cl.assignments[i]];
        nlab[cl.assignments[i]] += lab.count(pool[i]) ? 1 : 0;
    }
    std::vector<int> rank(k);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int c) {
        return nlab[a] != nlab[c] ? nlab[a] < nlab[c] : size[a] > size[c];
    });
    IndexList ref;
    for (int c : rank) {
        if (ref.size() == static_cast<std::size_t>(b)) break;
        IndexList mem;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (cl.assignments[i] == c) mem.push_back(static_cast<Index>(i));
        Matrix cp = gather_rows(pts, mem);
        const int kk = std::min<int>(knn, static_cast<int>(mem.size()) - 1);
        Index best = -1;
        double bt = -1.0;
        for (std::size_t t = 0; t < mem.size(); ++t) {
            if (lab.count(pool[mem[t]])) continue;
            const double ty = kk >= 1 ? naive_typicality(cp, static_cast<Index>(t), kk) : 0.0;
            if (ty > bt || (ty == bt && pool[mem[t]] < best)) {
                bt = ty;
                best = pool[mem[t]];
            }
        }
        if (best >= 0) ref.push_back(best);
    }
    CHECK(got == ref);
}

TEST_CASE("delta estimation on two blobs") {
    Matrix f = two_blobs(20, 10.0, 6);
    std::vector<double> grid;
    for (int g = 1; g <= 15; ++g) grid.push_back(g);
    // Tight blobs: the smallest cross-blob distance is just under 10.
    double gap = INFINITY;
    for (Index i = 0; i < 20; ++i)
        for (Index j = 20; j < 40; ++j) gap = std::min(gap, std::sqrt(oracle::sqdist(f, i, f, j)));
    double expect = 0.0;
    for (double g : grid)
        if (g < gap) expect = g;
    CHECK(estimate_delta(f, 2, 0.95, 1, grid) == expect);

    std::vector<double> upto5{1, 2, 3, 4, 5};
    CHECK(estimate_delta(f, 2, 0.95, 1, upto5) == 5.0);
    CHECK(estimate_delta(f, 2, 0.0, 1, grid) == 15.0);
    CHECK(estimate_delta(f.topRows(20), 1, 1.0, 1, grid) == 15.0);
}

TEST_CASE("delta grid spans the sampled distance percentiles") {
    Matrix f = oracle::random_matrix(100, 3, 2);
    auto grid = delta_grid(f, 4);
    CHECK(grid.size() == 64);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    CHECK(grid.front() > 0.0);
    for (std::size_t g = 2; g < grid.size(); ++g)
        CHECK(grid[g] / grid[g - 1] == doctest::Approx(grid[1] / grid[0]).epsilon(1e-9));
}

TEST_CASE("purity counts pure balls") {
    Matrix f = col({0, 1, 5, 6});
    std::vector<int> lab{0, 0, 1, 1};
    CHECK(purity_at(f, lab, 3.0) == 1.0);
    CHECK(purity_at(f, lab, 4.0) == 0.5);
    CHECK(purity_at(f, lab, 6.0) == 0.0);
}

TEST_CASE("probcover edge cases") {
    Matrix f = oracle::random_matrix(12, 2, 3);
    CHECK(query_probcover(f, {0, 5}, {1, 2, 3, 4, 6, 7}, 3, 0.0) == IndexList{1, 2, 3});
    CHECK(query_probcover(f, {}, iota_list(12), 1, 1e6) == IndexList{0});
}

TEST_CASE("probcover greedy trace matches a brute-force recount") {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        Matrix f = oracle::random_matrix(25, 2, 40 + trial);
        IndexList lab{3, 11}, unl;
        for (Index i = 0; i < 25; ++i)
            if (i != 3 && i != 11) unl.push_back(i);
        const double delta = 0.8;
        auto got = query_probcover(f, lab, unl, 6, delta);

        auto covers = [&](Index i, Index j) { return std::sqrt(oracle::sqdist(f, i, f, j)) <= delta; };
        std::vector<char> covered(25, 0);
        IndexList chosen = lab;
        for (Index c : lab)
            for (Index j = 0; j < 25; ++j) covered[j] |= covers(c, j);
        IndexList ref;
        for (int step = 0; step < 6; ++step) {
            Index best = -1;
            int best_gain = -1;
            for (Index i : unl) {
                if (std::find(ref.begin(), ref.end(), i) != ref.end()) continue;
                int gain = 0;
                for (Index j = 0; j < 25; ++j) gain += !covered[j] && covers(i, j);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = i;
                }
            }
            ref.push_back(best);
            for (Index j = 0; j < 25; ++j) covered[j] |= covers(best, j);
        }
        CHECK(got == ref);
    }
}

TEST_CASE("dropquery without dropout has no candidates") {
    auto in = small_instance(2);
    auto res = dropquery(in.ds.features, in.clf, in.unlabeled, 4, 3, 0.0, 9);
    CHECK(res.candidate_fraction.value() == 0.0);
    REQUIRE(res.selected.size() == 4);
    // The fallback is margin-diversified selection over the whole pool.
    Vector m = score_margin(in.clf.predict_proba(gather_rows(in.ds.features, in.unlabeled)));
    std::vector<double> s(m.data(), m.data() + m.size());
    CHECK(res.selected == diversify(s, in.ds.features, in.unlabeled, 4, 50, derive_seed(9, "dropquery.fallback"), true));
}

TEST_CASE("dropquery candidates replay the recorded masks") {
    Matrix w(2, 2);
    w << 1, 0, 0, 1;
    LinearClassifier clf(w, Vector::Zero(2));
    Matrix f(2, 2);
    f << 1.0, 0.9,   // A: class 0, flips when only feature 0 is dropped
        0.9, 1.0;    // B: class 1, flips when feature 1 is dropped
    const double rho = 0.5;
    // Find a query seed whose masks make A inconsistent 2 of 3 times and B
    // once, replaying the masks through scalar forward passes.
    std::uint64_t found = 0;
    bool ok = false;
    for (std::uint64_t seed = 0; seed < 2000 && !ok; ++seed) {
        auto masks = draw_dropout_masks(3, 2, 2, rho, derive_seed(seed, "dropquery.masks"));
        int flips[2] = {0, 0};
        for (int s = 0; s < 3; ++s)
            for (Index i = 0; i < 2; ++i) {
                auto p = oracle::head_proba(w, Vector::Zero(2), {f(i, 0) * masks.scale[s](i, 0), f(i, 1) * masks.scale[s](i, 1)});
                const int pred = p[1] > p[0] ? 1 : 0;
                flips[i] += pred != static_cast<int>(i);
            }
        if (flips[0] == 2 && flips[1] == 1) {
            found = seed;
            ok = true;
        }
    }
    REQUIRE(ok);
    auto cand = dropquery_candidates(clf, f, 3, rho, derive_seed(found, "dropquery.masks"));
    CHECK(cand.agreements == std::vector<int>{1, 2});
    CHECK(cand.in_candidate_set == std::vector<char>{1, 0});
    auto res = dropquery(f, clf, {0, 1}, 1, 3, rho, found);
    CHECK(res.selected == IndexList{0});
    CHECK(res.candidate_fraction.value() == 0.5);
}

TEST_CASE("always-inconsistent points are candidates") {
    // Dropping the only informative feature always flips the prediction.
    Matrix w(2, 1);
    w << 1, -1;
    Vector b(2);
    b << 0, 0.5;
    LinearClassifier clf(w, b);
    Matrix f = col({2.0});
    auto masks = draw_dropout_masks(3, 1, 1, 0.999, 5);
    bool all_dropped = true;
    for (const auto& m : masks.scale) all_dropped &= m(0, 0) == 0.0;
    REQUIRE(all_dropped);
    auto cand = dropquery_candidates(clf, f, 3, 0.999, 5);
    CHECK(cand.agreements[0] == 0);
    CHECK(cand.in_candidate_set[0] == 1);
}

TEST_CASE("literal predicate is the complement for odd M") {
    auto in = small_instance(3);
    Matrix z = gather_rows(in.ds.features, in.unlabeled);
    for (int m : {1, 3, 5, 7}) {
        auto prose = dropquery_candidates(in.clf, z, m, 0.75, 17);
        auto literal = dropquery_candidates(in.clf, z, m, 0.75, 17, true);
        CHECK(prose.agreements == literal.agreements);
        for (std::size_t i = 0; i < prose.in_candidate_set.size(); ++i)
            CHECK(prose.in_candidate_set[i] != literal.in_candidate_set[i]);
    }
}

TEST_CASE("every strategy returns min(B, |U|) distinct unlabeled indices and is repeatable") {
    auto in = small_instance(4);
    for (StrategyKind kind : all_strategies()) {
        for (bool div : {false, true}) {
            if (div && !supports_diversify(kind)) continue;
            QuerySpec spec;
            spec.kind = kind;
            if (div) spec.diversify = DiversifyOptions{};
            for (int b : {0, 1, 5, 1000}) {
                QueryContext ctx{in.ds.features, in.clf, in.labeled, in.labeled_labels, in.unlabeled, b, 4, 99};
                auto res = run_query(spec, ctx);
                INFO(spec.id(), " b=", b);
                CHECK(res.selected.size() == std::min<std::size_t>(b, in.unlabeled.size()));
                std::set<Index> uniq(res.selected.begin(), res.selected.end());
                CHECK(uniq.size() == res.selected.size());
                for (Index i : res.selected) CHECK(std::binary_search(in.unlabeled.begin(), in.unlabeled.end(), i));
                CHECK(run_query(spec, ctx).selected == res.selected);
                CHECK(res.candidate_fraction.has_value() == (kind == StrategyKind::dropquery));
            }
        }
    }
}

TEST_CASE("run_query rejects diversification on unsupported strategies") {
    auto in = small_instance(1);
    QuerySpec spec;
    spec.kind = StrategyKind::coreset;
    spec.diversify = DiversifyOptions{};
    QueryContext ctx{in.ds.features, in.clf, in.labeled, in.labeled_labels, in.unlabeled, 2, 4, 1};
    CHECK_THROWS_AS(run_query(spec, ctx), std::invalid_argument);
}

TEST_CASE("strategy names round trip") {
    CHECK(all_strategies().size() == 12);
    for (StrategyKind k : all_strategies()) CHECK(parse_strategy(to_string(k)) == k);
    CHECK_FALSE(parse_strategy("nope").has_value());
    QuerySpec spec;
    spec.kind = StrategyKind::margins;
    spec.diversify = DiversifyOptions{};
    CHECK(spec.id() == "margins+div");
    QuerySpec defaults;
    CHECK(defaults.mc_samples == 20);
    CHECK(defaults.dq_m == 3);
    CHECK(defaults.dropout_rho == 0.75);
    CHECK(defaults.alfamix_eps_scale == 0.2);
    CHECK(defaults.typiclust_max_clusters == 500);
    CHECK(defaults.typiclust_knn == 20);
    CHECK(defaults.probcover_purity == 0.95);
    CHECK(DiversifyOptions{}.multiplier == 50);
}
