#include <doctest.h>

#include <cmath>

#include "alcove/classifier.hpp"
#include "oracles.hpp"

using namespace alcove;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> init) {
    Matrix m(static_cast<Index>(init.size()), static_cast<Index>(init.begin()->size()));
    Index i = 0;
    for (const auto& r : init) {
        Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

double param_norm(const LinearClassifier& clf) {
    return std::sqrt(clf.weights().squaredNorm() + clf.bias().squaredNorm());
}

}  // namespace

TEST_CASE("softmax arithmetic") {
    auto p = softmax_rows(rows({{0.0, 0.0}, {std::log(3.0), 0.0}}));
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(0, 1) == doctest::Approx(0.5));
    CHECK(p(1, 0) == doctest::Approx(0.75));
    CHECK(p(1, 1) == doctest::Approx(0.25));
    // Large logits must not overflow.
    auto q = softmax_rows(rows({{1000.0, 999.0}}));
    CHECK(q.allFinite());
    CHECK(q(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("zero head predicts uniformly") {
    auto clf = LinearClassifier::zeros(4, 3);
    auto p = clf.predict_proba(oracle::random_matrix(5, 3, 1));
    for (Index i = 0; i < 5; ++i)
        for (Index c = 0; c < 4; ++c) CHECK(p(i, c) == doctest::Approx(0.25));
    // Ties go to the smallest class.
    for (int y : clf.predict(oracle::random_matrix(5, 3, 2))) CHECK(y == 0);
}

TEST_CASE("predict_proba matches a scalar recomputation and rows sum to one") {
    Matrix w = oracle::random_matrix(3, 4, 5);
    Vector b = oracle::random_matrix(3, 1, 6).col(0);
    LinearClassifier clf(w, b);
    Matrix x = oracle::random_matrix(10, 4, 7, 3.0);
    Matrix p = clf.predict_proba(x);
    for (Index i = 0; i < x.rows(); ++i) {
        std::vector<double> z(x.row(i).data(), x.row(i).data() + x.cols());
        auto ref = oracle::head_proba(w, b, z);
        for (Index c = 0; c < 3; ++c) CHECK(p(i, c) == doctest::Approx(ref[c]).epsilon(1e-12));
        CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("dimension mismatch is reported") {
    auto clf = LinearClassifier::zeros(2, 3);
    CHECK_THROWS_AS(clf.predict_proba(Matrix::Zero(2, 4)), std::invalid_argument);
    CHECK_THROWS_AS(mc_dropout_proba(clf, Matrix::Zero(2, 4), 3, 0.5, 1), std::invalid_argument);
    CHECK_THROWS(LinearClassifier(Matrix::Zero(2, 3), Vector::Zero(3)));
}

TEST_CASE("analytic gradient matches central differences") {
    const double h = 1e-4;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(100 + trial);
        const Index d = 1 + rng.uniform_index(5);
        const int c = 2 + static_cast<int>(rng.uniform_index(3));
        const Index n = 2 + rng.uniform_index(6);
        Matrix w = oracle::random_matrix(c, d, 200 + trial);
        Vector b = oracle::random_matrix(c, 1, 300 + trial).col(0);
        Matrix x = oracle::random_matrix(n, d, 400 + trial);
        std::vector<int> y(n);
        std::vector<double> sw(n);
        for (Index i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.uniform_index(c));
            sw[i] = 0.1 + rng.uniform();
        }
        auto g = cross_entropy_gradient(w, b, x, y, sw);
        auto loss_at = [&](const Matrix& ww, const Vector& bb) { return cross_entropy_gradient(ww, bb, x, y, sw).loss; };
        auto close = [](double analytic, double numeric) {
            return std::abs(analytic - numeric) <= 1e-3 * std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        };
        for (Index i = 0; i < c; ++i) {
            for (Index j = 0; j < d; ++j) {
                Matrix wp = w, wm = w;
                wp(i, j) += h;
                wm(i, j) -= h;
                CHECK(close(g.grad_weights(i, j), (loss_at(wp, b) - loss_at(wm, b)) / (2 * h)));
            }
            Vector bp = b, bm = b;
            bp(i) += h;
            bm(i) -= h;
            CHECK(close(g.grad_bias(i), (loss_at(w, bp) - loss_at(w, bm)) / (2 * h)));
        }
    }
}

TEST_CASE("two separable points are fit exactly") {
    Matrix x = rows({{1.0, 0.0}, {-1.0, 0.0}});
    std::vector<int> y{0, 1};
    TrainConfig cfg;
    cfg.dropout_rho = 0.0;
    cfg.epochs = 500;
    auto clf = train(x, y, 2, cfg, 3);
    CHECK(clf.predict(x) == y);
    CHECK(clf.weights().allFinite());
}

TEST_CASE("training is deterministic in the seed") {
    auto ds = generate_synthetic(3, 20, 4, 2.0, 1);
    Matrix x = gather_rows(ds.features, ds.train_indices);
    std::vector<int> y;
    for (Index i : ds.train_indices) y.push_back(ds.labels[i]);
    auto a = train(x, y, 3, {}, 3);
    auto b = train(x, y, 3, {}, 3);
    CHECK(a.weights() == b.weights());
    CHECK(a.bias() == b.bias());
    auto c = train(x, y, 3, {}, 4);
    CHECK(a.weights() != c.weights());
}

TEST_CASE("all-one sample weights are bit-identical to unweighted training") {
    auto ds = generate_synthetic(3, 20, 4, 2.0, 2);
    Matrix x = gather_rows(ds.features, ds.train_indices);
    std::vector<int> y;
    for (Index i : ds.train_indices) y.push_back(ds.labels[i]);
    TrainConfig weighted;
    weighted.sample_weights = std::vector<double>(y.size(), 1.0);
    auto a = train(x, y, 3, {}, 8);
    auto b = train(x, y, 3, weighted, 8);
    CHECK(a.weights() == b.weights());
    CHECK(a.bias() == b.bias());
}

TEST_CASE("a single weighted example drives the head towards its class") {
    Matrix x = oracle::random_matrix(6, 3, 21);
    std::vector<int> y{0, 1, 2, 0, 1, 2};
    for (Index keep = 0; keep < 6; ++keep) {
        TrainConfig cfg;
        cfg.dropout_rho = 0.0;
        cfg.sample_weights = std::vector<double>(6, 0.0);
        (*cfg.sample_weights)[keep] = 2.5;
        auto clf = train(x, y, 3, cfg, 1);
        CHECK(clf.predict(gather_rows(x, {keep}))[0] == y[keep]);
        // The first AdamW step moves each weight by -lr·sign(g), and the
        // single-example gradient is (p - e_y) z^T, so row y turns towards z.
        Vector z = x.row(keep).transpose();
        for (int c = 0; c < 3; ++c)
            if (c != y[keep]) CHECK(clf.weights().row(y[keep]).dot(z) > clf.weights().row(c).dot(z));
    }
}

TEST_CASE("missing classes do not stop training") {
    Matrix x = oracle::random_matrix(4, 3, 2);
    std::vector<int> y{0, 0, 2, 2};
    auto clf = train(x, y, 5, {}, 1);
    CHECK(clf.num_classes() == 5);
    CHECK(clf.weights().allFinite());
}

TEST_CASE("larger weight decay never increases the parameter norm") {
    Matrix x = rows({{2.0, 1.0}, {1.5, 2.0}, {-2.0, -1.0}, {-1.0, -2.5}});
    std::vector<int> y{0, 0, 1, 1};
    double prev = INFINITY;
    for (double wd : {0.0, 0.01, 0.1, 1.0, 5.0}) {
        double mean = 0.0;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            TrainConfig cfg;
            cfg.weight_decay = wd;
            cfg.epochs = 300;
            mean += param_norm(train(x, y, 2, cfg, s)) / 5.0;
        }
        CHECK(mean <= prev);
        prev = mean;
    }
}

TEST_CASE("divergence is reported with its epoch") {
    Matrix x = rows({{10.0, -10.0}, {-10.0, 10.0}});
    std::vector<int> y{0, 1};
    TrainConfig cfg;
    cfg.dropout_rho = 0.0;
    cfg.learning_rate = 1e308;
    cfg.weight_decay = 0.0;
    try {
        train(x, y, 2, cfg, 1);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(e.epoch() == 2);
    }
}

TEST_CASE("invalid training inputs are rejected") {
    Matrix x = oracle::random_matrix(2, 2, 1);
    CHECK_THROWS(train(Matrix(0, 2), std::vector<int>{}, 2, {}, 1));
    CHECK_THROWS(train(x, std::vector<int>{0, 3}, 2, {}, 1));
    TrainConfig cfg;
    cfg.dropout_rho = 1.0;
    CHECK_THROWS(train(x, std::vector<int>{0, 1}, 2, cfg, 1));
}

TEST_CASE("mc dropout with rho zero reproduces predict_proba") {
    LinearClassifier clf(oracle::random_matrix(3, 4, 1), Vector::Ones(3));
    Matrix x = oracle::random_matrix(6, 4, 2);
    auto stack = mc_dropout_proba(clf, x, 5, 0.0, 9);
    CHECK(stack.size() == 5);
    for (const auto& p : stack) CHECK(p == clf.predict_proba(x));
}

TEST_CASE("mc dropout is deterministic in its seed") {
    LinearClassifier clf(oracle::random_matrix(3, 4, 1), Vector::Zero(3));
    Matrix x = oracle::random_matrix(6, 4, 2);
    auto a = mc_dropout_proba(clf, x, 20, 0.75, 4);
    auto b = mc_dropout_proba(clf, x, 20, 0.75, 4);
    for (std::size_t s = 0; s < a.size(); ++s) CHECK(a[s] == b[s]);
    auto c = mc_dropout_proba(clf, x, 20, 0.75, 5);
    bool differs = false;
    for (std::size_t s = 0; s < a.size(); ++s) differs |= a[s] != c[s];
    CHECK(differs);
}

TEST_CASE("mc dropout samples match a scalar replay of the recorded masks") {
    Matrix w = rows({{1.0, -2.0}, {0.5, 3.0}, {-1.0, 0.25}});
    Vector b(3);
    b << 0.1, -0.2, 0.3;
    LinearClassifier clf(w, b);
    Matrix x = rows({{1.5, -0.5}, {-2.0, 1.0}, {0.3, 0.7}});
    const double rho = 0.5;
    auto masks = draw_dropout_masks(8, 3, 2, rho, 77);
    auto stack = mc_dropout_proba(clf, x, 8, rho, 77);
    int dropped = 0;
    for (int s = 0; s < 8; ++s) {
        for (Index i = 0; i < 3; ++i) {
            std::vector<double> z(2);
            for (Index j = 0; j < 2; ++j) {
                const double m = masks.scale[s](i, j);
                CHECK((m == 0.0 || m == 2.0));
                dropped += m == 0.0;
                z[j] = x(i, j) * m;
            }
            auto ref = oracle::head_proba(w, b, z);
            for (Index c = 0; c < 3; ++c) CHECK(stack[s](i, c) == doctest::Approx(ref[c]).epsilon(1e-12));
        }
    }
    CHECK(dropped > 0);
    CHECK(dropped < 48);
}

TEST_CASE("mask entries follow Bernoulli(1 - rho)") {
    auto masks = draw_dropout_masks(50, 40, 10, 0.75, 3);
    double kept = 0.0;
    for (const auto& m : masks.scale) kept += (m.array() > 0.0).count();
    CHECK(kept / (50.0 * 40.0 * 10.0) == doctest::Approx(0.25).epsilon(0.1));
    for (const auto& m : masks.scale) CHECK(((m.array() == 0.0) || (m.array() == 4.0)).all());
}

TEST_CASE("evaluate counts correct test predictions") {
    EmbeddingDataset ds;
    ds.num_classes = 2;
    ds.features = oracle::random_matrix(6, 2, 1);
    ds.labels = {0, 1, 0, 0, 0, 0};
    ds.train_indices = {0, 1};
    ds.test_indices = {2, 3, 4, 5};
    Vector b(2);
    b << 1.0, 0.0;
    LinearClassifier always0(Matrix::Zero(2, 2), b);
    CHECK(evaluate(always0, ds) == 1.0);
    ds.labels = {0, 1, 0, 1, 0, 1};
    CHECK(evaluate(always0, ds) == 0.5);
    ds.test_indices.clear();
    CHECK_THROWS_AS(evaluate(always0, ds), DatasetError);
}

TEST_CASE("separable synthetic set is learned") {
    auto ds = generate_synthetic(10, 100, 32, 8.0, 1);
    Matrix x = gather_rows(ds.features, ds.train_indices);
    std::vector<int> y;
    for (Index i : ds.train_indices) y.push_back(ds.labels[i]);
    auto clf = train(x, y, 10, {}, 1);
    CHECK(evaluate(clf, ds) > 0.95);
}
