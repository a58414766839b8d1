#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alcove/classifier.hpp"
#include "alcove/dataset.hpp"
#include "alcove/strategies.hpp"

namespace alcove {

enum class InitKind {
    automatic,  // own for typiclust/probcover/dropquery, random for random, centroid otherwise
    random,
    centroid,
    own,  // the strategy queries the empty pool with an untrained classifier
};

std::string_view to_string(InitKind kind);
std::optional<InitKind> parse_init(std::string_view name);

struct RunConfig {
    int iterations = 20;
    std::vector<std::uint64_t> seeds{1, 10, 100, 1000, 10000};
    int budget = 0;  // 0 means one label per class
    QuerySpec strategy;
    InitKind init = InitKind::automatic;
    TrainConfig train;
    bool semisupervised = false;
    double propagation_alpha = 0.9;
    int propagation_knn = 500;
};

struct IterationRow {
    int iteration = 0;  // 1-based; row 1 is the model trained on the initial pool
    Index labeled = 0;  // labels the evaluated model was trained on
    double accuracy = 0.0;
    // Candidate fraction of the query issued on this row's model.
    std::optional<double> candidate_fraction;
    double wall_time = 0.0;  // seconds
    bool truncated = false;  // the pool ran dry at this row's query
};

struct RunRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<IterationRow> rows;
    Index oracle_queries = 0;  // labels revealed, initial pool included
};

// The only source of training labels during a run. Counts every reveal and
// refuses repeats or indices outside the train split.
class LabelOracle {
public:
    explicit LabelOracle(const EmbeddingDataset& dataset);

    int reveal(Index idx);
    Index count() const { return count_; }
    bool revealed(Index idx) const { return revealed_.at(static_cast<std::size_t>(idx)) != 0; }

private:
    const EmbeddingDataset& dataset_;
    std::vector<char> in_train_;
    std::vector<char> revealed_;
    Index count_ = 0;
};

InitKind resolve_init(InitKind requested, StrategyKind strategy);

// Init pool, then for t = 1..T: train from scratch, evaluate on the test
// split, query a batch and reveal it. Deterministic in `seed`.
RunRecord run_al(const EmbeddingDataset& dataset, const RunConfig& config, std::uint64_t seed);

struct BenchCell {
    std::string strategy;
    std::uint64_t seed = 0;
    std::optional<RunRecord> record;
    std::string error;  // set when the cell failed
};

// strategies × config.seeds, run on up to `threads` workers. Cells come back
// in grid order (strategy-major) whatever the execution order was.
std::vector<BenchCell> run_bench(const EmbeddingDataset& dataset, const std::vector<QuerySpec>& strategies,
                                 const RunConfig& config, int threads);

// ALCOVE_THREADS if set and positive, else the hardware concurrency.
int thread_cap_from_env();

struct SummaryRow {
    std::string strategy;
    int iteration = 0;
    int count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
};

// Mean/std of accuracy over seeds per (strategy, iteration), streaming.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

}  // namespace alcove
