#include "alcove/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "alcove/rng.hpp"

namespace alcove {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_rho(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("dropout rho must lie in [0, 1)");
}

}  // namespace

LinearClassifier::LinearClassifier(Matrix weights, Vector bias, TrainConfig config)
    : weights_(std::move(weights)), bias_(std::move(bias)), config_(std::move(config)) {
    if (bias_.size() != weights_.rows())
        throw std::invalid_argument("LinearClassifier: bias length must equal the number of classes");
}

LinearClassifier LinearClassifier::zeros(int num_classes, Index dim) {
    return LinearClassifier(Matrix::Zero(num_classes, dim), Vector::Zero(num_classes));
}

void LinearClassifier::check_width(const Matrix& features) const {
    if (features.cols() != dim())
        throw std::invalid_argument(
            fmt::format("feature width {} does not match classifier width {}", features.cols(), dim()));
}

Matrix LinearClassifier::logits(const Matrix& features) const {
    check_width(features);
    Matrix out = features * weights_.transpose();
    out.rowwise() += bias_.transpose();
    return out;
}

Matrix LinearClassifier::predict_proba(const Matrix& features) const { return softmax_rows(logits(features)); }

std::vector<int> LinearClassifier::predict(const Matrix& features) const {
    const Matrix p = predict_proba(features);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Index i = 0; i < p.rows(); ++i) out[i] = argmax_row(p, i);
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Index k = 0; k < logits.cols(); ++k) {
            p(i, k) = std::exp(logits(i, k) - mx);
            sum += p(i, k);
        }
        p.row(i) /= sum;
    }
    return p;
}

int argmax_row(const Matrix& m, Index row) {
    Index best = 0;
    for (Index k = 1; k < m.cols(); ++k)
        if (m(row, k) > m(row, best)) best = k;
    return static_cast<int>(best);
}

LossGradient cross_entropy_gradient(const Matrix& weights, const Vector& bias, const Matrix& features,
                                    std::span<const int> labels, std::span<const double> sample_weights) {
    const Index n = features.rows();
    if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("label count must match rows");
    if (!sample_weights.empty() && static_cast<Index>(sample_weights.size()) != n)
        throw std::invalid_argument("sample weight count must match rows");
    if (features.cols() != weights.cols()) throw std::invalid_argument("feature width mismatch");

    Matrix logits = features * weights.transpose();
    logits.rowwise() += bias.transpose();

    double total_w = 0.0;
    for (Index i = 0; i < n; ++i) total_w += sample_weights.empty() ? 1.0 : sample_weights[i];
    if (!(total_w > 0.0)) throw std::invalid_argument("sample weights must have a positive sum");

    LossGradient out;
    Matrix dlogits(n, weights.rows());
    for (Index i = 0; i < n; ++i) {
        const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
        const double mx = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Index k = 0; k < logits.cols(); ++k) {
            dlogits(i, k) = std::exp(logits(i, k) - mx);
            sum += dlogits(i, k);
        }
        const int y = labels[i];
        out.loss += w * (std::log(sum) + mx - logits(i, y));
        dlogits.row(i) /= sum;
        dlogits(i, y) -= 1.0;
        dlogits.row(i) *= w / total_w;
    }
    out.loss /= total_w;
    out.grad_weights = dlogits.transpose() * features;
    out.grad_bias = dlogits.colwise().sum().transpose();
    return out;
}

LinearClassifier train(const Matrix& features, std::span<const int> labels, int num_classes,
                       const TrainConfig& config, std::uint64_t seed) {
    const Index n = features.rows();
    const Index d = features.cols();
    if (n < 1) throw std::invalid_argument("train: need at least one labeled example");
    if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("train: label count must match rows");
    if (num_classes < 1) throw std::invalid_argument("train: num_classes must be positive");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw std::invalid_argument("train: label outside [0, num_classes)");
    if (!(config.learning_rate > 0.0) || !(config.weight_decay >= 0.0) || config.epochs < 1)
        throw std::invalid_argument("train: invalid optimiser configuration");
    check_rho(config.dropout_rho);

    std::vector<double> weights = config.sample_weights.value_or(std::vector<double>(n, 1.0));
    if (static_cast<Index>(weights.size()) != n) throw std::invalid_argument("train: sample_weights length mismatch");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("train: sample weights must be finite and >= 0");

    Matrix W = Matrix::Zero(num_classes, d);
    Vector b = Vector::Zero(num_classes);
    Matrix mW = Matrix::Zero(num_classes, d), vW = Matrix::Zero(num_classes, d);
    Vector mb = Vector::Zero(num_classes), vb = Vector::Zero(num_classes);

    Rng rng(derive_seed(seed, "classifier.dropout"));
    const double rho = config.dropout_rho;
    const double keep_scale = 1.0 / (1.0 - rho);
    Matrix dropped(n, d);
    double b1t = 1.0, b2t = 1.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const Matrix* x = &features;
        if (rho > 0.0) {
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < d; ++j)
                    dropped(i, j) = rng.uniform() < rho ? 0.0 : features(i, j) * keep_scale;
            x = &dropped;
        }
        const LossGradient g = cross_entropy_gradient(W, b, *x, labels, weights);
        if (!std::isfinite(g.loss))
            throw TrainingError(fmt::format("training diverged: non-finite loss at epoch {}", epoch), epoch);

        b1t *= kBeta1;
        b2t *= kBeta2;
        const double decay = 1.0 - config.learning_rate * config.weight_decay;
        W *= decay;
        b *= decay;
        mW = kBeta1 * mW + (1.0 - kBeta1) * g.grad_weights;
        vW = kBeta2 * vW + (1.0 - kBeta2) * g.grad_weights.cwiseAbs2();
        mb = kBeta1 * mb + (1.0 - kBeta1) * g.grad_bias;
        vb = kBeta2 * vb + (1.0 - kBeta2) * g.grad_bias.cwiseAbs2();
        W.array() -= config.learning_rate * (mW.array() / (1.0 - b1t)) /
                     ((vW.array() / (1.0 - b2t)).sqrt() + kAdamEps);
        b.array() -= config.learning_rate * (mb.array() / (1.0 - b1t)) /
                     ((vb.array() / (1.0 - b2t)).sqrt() + kAdamEps);
    }
    if (!W.allFinite() || !b.allFinite())
        throw TrainingError("training produced non-finite parameters", config.epochs);
    return LinearClassifier(std::move(W), std::move(b), config);
}

DropoutMasks draw_dropout_masks(int samples, Index rows, Index dim, double rho, std::uint64_t seed) {
    check_rho(rho);
    if (samples < 0) throw std::invalid_argument("draw_dropout_masks: negative sample count");
    DropoutMasks masks;
    masks.rho = rho;
    masks.scale.reserve(static_cast<std::size_t>(samples));
    const double keep_scale = 1.0 / (1.0 - rho);
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
        Matrix m(rows, dim);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < dim; ++j) m(i, j) = (rho > 0.0 && rng.uniform() < rho) ? 0.0 : keep_scale;
        masks.scale.push_back(std::move(m));
    }
    return masks;
}

std::vector<Matrix> apply_dropout_masks(const LinearClassifier& clf, const Matrix& features,
                                        const DropoutMasks& masks) {
    std::vector<Matrix> out;
    out.reserve(masks.scale.size());
    for (const Matrix& m : masks.scale) {
        if (m.rows() != features.rows() || m.cols() != features.cols())
            throw std::invalid_argument("dropout mask shape does not match features");
        out.push_back(clf.predict_proba(features.cwiseProduct(m)));
    }
    return out;
}

std::vector<Matrix> mc_dropout_proba(const LinearClassifier& clf, const Matrix& features, int samples,
                                     double rho, std::uint64_t seed) {
    if (features.cols() != clf.dim()) throw std::invalid_argument("feature width does not match classifier");
    return apply_dropout_masks(clf, features, draw_dropout_masks(samples, features.rows(), features.cols(), rho, seed));
}

double evaluate(const LinearClassifier& clf, const EmbeddingDataset& dataset) {
    if (dataset.test_indices.empty()) throw DatasetError("cannot evaluate on an empty test split");
    const std::vector<int> pred = clf.predict(gather_rows(dataset.features, dataset.test_indices));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == dataset.labels[dataset.test_indices[i]]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace alcove
