#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alcove/classifier.hpp"
#include "alcove/rng.hpp"
#include "alcove/types.hpp"

namespace alcove {

enum class StrategyKind {
    random,
    uncertainty,
    entropy,
    margins,
    bald,
    powerbald,
    coreset,
    badge,
    alfamix,
    typiclust,
    probcover,
    dropquery,
};

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy(std::string_view name);
const std::vector<StrategyKind>& all_strategies();

// Score-based strategies (top-B by a per-point score) accept the
// shortlist-and-cluster diversification wrapper.
bool supports_diversify(StrategyKind kind);

struct DiversifyOptions {
    int multiplier = 50;  // shortlist size is multiplier * B
    bool inference_dropout = false;
};

struct QuerySpec {
    StrategyKind kind = StrategyKind::random;
    std::optional<DiversifyOptions> diversify;
    int mc_samples = 20;
    int dq_m = 3;
    // Feature-dropout ratio for every stochastic forward pass made while
    // querying (DropQuery, BALD, PowerBALD, inference-time dropout).
    double dropout_rho = 0.75;
    // Use the candidate predicate exactly as printed in the algorithm box
    // (keep points whose dropout predictions mostly agree).
    bool dq_literal = false;
    double power_beta = 1.0;
    double alfamix_eps_scale = 0.2;
    int typiclust_max_clusters = 500;
    int typiclust_knn = 20;
    double probcover_purity = 0.95;
    // Coverage radius; estimated from the pool when unset.
    std::optional<double> probcover_delta;

    // Strategy name, suffixed with "+div" when diversified.
    std::string id() const;
};

struct QueryResult {
    IndexList selected;
    // |Z_c| / |unlabeled| for DropQuery.
    std::optional<double> candidate_fraction;
};

// All indices are global row indices into `features`.
struct QueryContext {
    const Matrix& features;
    const LinearClassifier& classifier;
    const IndexList& labeled;
    std::span<const int> labeled_labels;  // revealed labels, aligned with `labeled`
    const IndexList& unlabeled;           // ascending
    int budget;
    int num_classes;
    std::uint64_t seed;
};

// Returns exactly min(budget, |unlabeled|) distinct unlabeled indices.
QueryResult run_query(const QuerySpec& spec, const QueryContext& ctx);

// ---------------------------------------------------------------------------
// Scores. Higher always means "more worth labeling".

double entropy(std::span<const double> p);

Vector score_uncertainty(const Matrix& probs);
Vector score_entropy(const Matrix& probs);
Vector score_margin(const Matrix& probs);
// Mutual information: H(mean_s p_s) - mean_s H(p_s), clamped at zero.
Vector score_bald(const std::vector<Matrix>& mc_probs);

// The b highest scores; `scores` is aligned with `unlabeled`.
IndexList select_topb(std::span<const double> scores, const IndexList& unlabeled, int b);

// Shortlist the top multiplier*b points, k-means them into b clusters and
// return the members nearest the centroids, padded by score order. With
// `keep_boundary_ties` every point tied with the last shortlisted score is
// also shortlisted.
IndexList diversify(std::span<const double> scores, const Matrix& features, const IndexList& unlabeled, int b,
                    int multiplier, std::uint64_t seed, bool keep_boundary_ties = false);

// Draws b indices without replacement with probability ∝ (score + 1e-12)^beta.
IndexList query_powerbald(std::span<const double> bald_scores, const IndexList& unlabeled, int b, double beta,
                          Rng& rng);

// Greedy k-centre with the labeled points as existing centres.
IndexList query_coreset(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b);

// ---------------------------------------------------------------------------
// BADGE

// ||z_i p_i^T - z_j p_j^T||_F^2 without forming either outer product.
double badge_sq_dist(std::span<const double> z_i, std::span<const double> p_i, std::span<const double> z_j,
                     std::span<const double> p_j);

// p - onehot(argmax p), one row per point.
Matrix badge_residuals(const Matrix& probs);

IndexList query_badge(const Matrix& features, const LinearClassifier& clf, const IndexList& unlabeled, int b,
                      Rng& rng);

// ---------------------------------------------------------------------------
// ALFA-Mix

struct AlfaMixCandidates {
    std::vector<int> flip_counts;  // aligned with unlabeled
};

// Throws StrategyUnavailable when there are no labeled anchors.
AlfaMixCandidates alfamix_candidates(const Matrix& features, const LinearClassifier& clf, const IndexList& labeled,
                                     std::span<const int> labeled_labels, const IndexList& unlabeled,
                                     double eps_scale);

IndexList query_alfamix(const Matrix& features, const LinearClassifier& clf, const IndexList& labeled,
                        std::span<const int> labeled_labels, const IndexList& unlabeled, int b, double eps_scale,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// TypiClust

// 1 / (mean distance to the k nearest other points + 1e-12).
double typicality(const Matrix& points, Index idx, int k);

IndexList query_typiclust(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b,
                          int max_clusters, int knn, std::uint64_t seed);

// ---------------------------------------------------------------------------
// ProbCover

// 64 log-spaced radii between the 1st and 99th percentile of 2000 sampled
// pairwise distances.
std::vector<double> delta_grid(const Matrix& points, std::uint64_t seed);

// Fraction of points whose closed delta-ball holds a single pseudo-label.
double purity_at(const Matrix& points, const std::vector<int>& pseudo_labels, double delta);

// Largest grid radius with purity >= threshold (pseudo-labels from k-means
// with `num_clusters`). Falls back to the smallest radius if none qualifies.
double estimate_delta(const Matrix& points, int num_clusters, double purity_threshold, std::uint64_t seed,
                      std::optional<std::vector<double>> grid = std::nullopt);

IndexList query_probcover(const Matrix& features, const IndexList& labeled, const IndexList& unlabeled, int b,
                          double delta);

// ---------------------------------------------------------------------------
// DropQuery

struct DropQueryCandidates {
    std::vector<int> base_prediction;  // undropped argmax per row
    std::vector<int> agreements;       // n_i: dropout predictions equal to base
    std::vector<char> in_candidate_set;
};

// Masks come from draw_dropout_masks(m, rows, d, rho, mask_seed).
DropQueryCandidates dropquery_candidates(const LinearClassifier& clf, const Matrix& points, int m, double rho,
                                         std::uint64_t mask_seed, bool literal = false);

// Candidates are the points where more than half of m dropout predictions
// disagree with the undropped one; they are clustered into b groups and the
// members nearest the centroids are queried. A short candidate set is
// topped up with margin-diversified picks from the rest of the pool.
QueryResult dropquery(const Matrix& features, const LinearClassifier& clf, const IndexList& unlabeled, int b, int m,
                      double rho, std::uint64_t seed, bool literal = false);

}  // namespace alcove
