#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "alcove/dataset.hpp"
#include "alcove/types.hpp"

namespace alcove {

struct TrainConfig {
    double learning_rate = 1e-2;
    double weight_decay = 1e-2;
    // Input-feature dropout probability; kept features are scaled by 1/(1-rho).
    double dropout_rho = 0.75;
    int epochs = 100;
    // Per-example loss weights (label propagation confidences). Unset means
    // all ones; the two are bit-identical.
    std::optional<std::vector<double>> sample_weights;
};

// Affine softmax head: p = softmax(W z + b), W is C×d.
class LinearClassifier {
public:
    LinearClassifier() = default;
    LinearClassifier(Matrix weights, Vector bias, TrainConfig config = {});

    // The untrained head: all-zero parameters, uniform predictions.
    static LinearClassifier zeros(int num_classes, Index dim);

    int num_classes() const { return static_cast<int>(weights_.rows()); }
    Index dim() const { return weights_.cols(); }
    const Matrix& weights() const { return weights_; }
    const Vector& bias() const { return bias_; }
    const TrainConfig& config() const { return config_; }

    Matrix logits(const Matrix& features) const;
    Matrix predict_proba(const Matrix& features) const;
    // Argmax of each row, smallest class index on ties.
    std::vector<int> predict(const Matrix& features) const;

private:
    void check_width(const Matrix& features) const;

    Matrix weights_;
    Vector bias_;
    TrainConfig config_;
};

// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

// Index of the largest entry; ties go to the smaller index.
int argmax_row(const Matrix& m, Index row);

struct LossGradient {
    double loss = 0.0;
    Matrix grad_weights;
    Vector grad_bias;
};

// Weighted mean cross-entropy sum_i w_i CE_i / sum_i w_i and its gradient
// with respect to (W, b). An empty `sample_weights` means all ones.
LossGradient cross_entropy_gradient(const Matrix& weights, const Vector& bias, const Matrix& features,
                                    std::span<const int> labels,
                                    std::span<const double> sample_weights = {});

// Full-batch AdamW from zero initialisation, fresh dropout mask every epoch.
// Throws TrainingError if the loss stops being finite.
LinearClassifier train(const Matrix& features, std::span<const int> labels, int num_classes,
                       const TrainConfig& config, std::uint64_t seed);

// Per-sample multiplicative masks: each entry is 0 or 1/(1-rho).
struct DropoutMasks {
    double rho = 0.0;
    std::vector<Matrix> scale;  // samples × (rows×dim)
};

// Masks are drawn sample by sample, row by row, feature by feature from a
// single stream seeded with `seed`.
DropoutMasks draw_dropout_masks(int samples, Index rows, Index dim, double rho, std::uint64_t seed);

std::vector<Matrix> apply_dropout_masks(const LinearClassifier& clf, const Matrix& features,
                                        const DropoutMasks& masks);

// Monte-Carlo feature dropout: `samples` stacked M×C probability matrices.
std::vector<Matrix> mc_dropout_proba(const LinearClassifier& clf, const Matrix& features, int samples,
                                     double rho, std::uint64_t seed);

// Test-split accuracy. Throws DatasetError on an empty test split.
double evaluate(const LinearClassifier& clf, const EmbeddingDataset& dataset);

}  // namespace alcove
