#include "alcove/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "alcove/initpool.hpp"
#include "alcove/semisup.hpp"

namespace alcove {

std::string_view to_string(InitKind kind) {
    switch (kind) {
        case InitKind::automatic: return "auto";
        case InitKind::random: return "random";
        case InitKind::centroid: return "centroid";
        case InitKind::own: return "own";
    }
    return "unknown";
}

std::optional<InitKind> parse_init(std::string_view name) {
    if (name == "auto") return InitKind::automatic;
    if (name == "random") return InitKind::random;
    if (name == "centroid") return InitKind::centroid;
    if (name == "own" || name == "none") return InitKind::own;
    return std::nullopt;
}

LabelOracle::LabelOracle(const EmbeddingDataset& dataset)
    : dataset_(dataset),
      in_train_(static_cast<std::size_t>(dataset.size()), 0),
      revealed_(static_cast<std::size_t>(dataset.size()), 0) {
    for (Index i : dataset.train_indices) in_train_[i] = 1;
}

int LabelOracle::reveal(Index idx) {
    if (idx < 0 || idx >= dataset_.size() || !in_train_[idx])
        throw std::logic_error(fmt::format("oracle: index {} is not in the train split", idx));
    if (revealed_[idx]) throw std::logic_error(fmt::format("oracle: index {} was already revealed", idx));
    revealed_[idx] = 1;
    ++count_;
    return dataset_.labels[idx];
}

InitKind resolve_init(InitKind requested, StrategyKind strategy) {
    if (requested != InitKind::automatic) return requested;
    switch (strategy) {
        case StrategyKind::typiclust:
        case StrategyKind::probcover:
        case StrategyKind::dropquery: return InitKind::own;
        case StrategyKind::random: return InitKind::random;
        default: return InitKind::centroid;
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

RunRecord run_al(const EmbeddingDataset& dataset, const RunConfig& config, std::uint64_t seed) {
    if (config.iterations < 1) throw std::invalid_argument("run_al: iterations must be >= 1");
    const int budget = config.budget > 0 ? config.budget : dataset.num_classes;
    if (static_cast<std::size_t>(budget) > dataset.train_indices.size())
        throw std::invalid_argument("run_al: budget exceeds the train split");

    RunRecord record;
    record.strategy = config.strategy.id();
    record.seed = seed;

    QuerySpec spec = config.strategy;
    if (spec.kind == StrategyKind::probcover && !spec.probcover_delta) {
        spec.probcover_delta = estimate_delta(gather_rows(dataset.features, dataset.train_indices),
                                              dataset.num_classes, spec.probcover_purity,
                                              derive_seed(seed, "probcover.delta"));
    }

    LabelOracle oracle(dataset);
    PoolState pool = PoolState::from_train(dataset.train_indices);
    std::vector<int> revealed_labels;
    auto reveal = [&](const IndexList& batch) {
        pool.reveal(batch);
        for (Index i : batch) revealed_labels.push_back(oracle.reveal(i));
    };

    const LinearClassifier untrained = LinearClassifier::zeros(dataset.num_classes, dataset.dim());
    auto query = [&](const LinearClassifier& clf, std::uint64_t query_seed) {
        const QueryContext ctx{dataset.features, clf,    pool.labeled,        revealed_labels,
                               pool.unlabeled,   budget, dataset.num_classes, query_seed};
        return run_query(spec, ctx);
    };

    switch (resolve_init(config.init, spec.kind)) {
        case InitKind::random:
            reveal(random_init(dataset.train_indices, budget, derive_seed(seed, "init")));
            break;
        case InitKind::centroid:
            reveal(centroid_init(dataset.features, dataset.train_indices, budget, derive_seed(seed, "init")));
            break;
        case InitKind::own:
        case InitKind::automatic: {
            QueryResult r;
            try {
                r = query(untrained, derive_seed(seed, "init"));
            } catch (const StrategyUnavailable& e) {
                throw StrategyUnavailable(fmt::format(
                    "{} cannot select the initial pool itself ({}); use --init random or --init centroid",
                    spec.id(), e.what()));
            }
            reveal(r.selected);
            break;
        }
    }

    std::optional<SparseMatrix> graph;
    const Matrix train_features = gather_rows(dataset.features, dataset.train_indices);
    if (config.semisupervised) graph = build_knn_graph(train_features, config.propagation_knn);

    for (int t = 1; t <= config.iterations; ++t) {
        const auto t0 = Clock::now();
        LinearClassifier clf;
        const std::uint64_t train_seed = derive_seed(seed, "train", static_cast<std::uint64_t>(t));
        if (graph) {
            Matrix y = Matrix::Zero(static_cast<Index>(dataset.train_indices.size()), dataset.num_classes);
            for (std::size_t i = 0; i < pool.labeled.size(); ++i) {
                const auto pos = std::lower_bound(dataset.train_indices.begin(), dataset.train_indices.end(),
                                                  pool.labeled[i]) -
                                 dataset.train_indices.begin();
                y(pos, revealed_labels[i]) = 1.0;
            }
            const PropagationResult prop = label_propagate(*graph, y, config.propagation_alpha);
            std::vector<int> pseudo(dataset.train_indices.size());
            for (Index i = 0; i < prop.pseudo_probs.rows(); ++i) pseudo[i] = argmax_row(prop.pseudo_probs, i);
            TrainConfig tc = config.train;
            tc.sample_weights = prop.weights;
            clf = train(train_features, pseudo, dataset.num_classes, tc, train_seed);
        } else {
            clf = train(gather_rows(dataset.features, pool.labeled), revealed_labels, dataset.num_classes,
                        config.train, train_seed);
        }

        IterationRow row;
        row.iteration = t;
        row.labeled = static_cast<Index>(pool.labeled.size());
        row.accuracy = evaluate(clf, dataset);

        const QueryResult r = query(clf, derive_seed(seed, "query", static_cast<std::uint64_t>(t)));
        row.candidate_fraction = r.candidate_fraction;
        reveal(r.selected);
        row.truncated = static_cast<int>(r.selected.size()) < budget;
        row.wall_time = seconds_since(t0);
        pool.iteration = t;
        record.rows.push_back(row);
        if (row.truncated) break;
    }
    record.oracle_queries = oracle.count();
    return record;
}

std::vector<BenchCell> run_bench(const EmbeddingDataset& dataset, const std::vector<QuerySpec>& strategies,
                                 const RunConfig& config, int threads) {
    std::vector<BenchCell> cells;
    for (const QuerySpec& s : strategies)
        for (std::uint64_t seed : config.seeds) cells.push_back({s.id(), seed, std::nullopt, {}});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            RunConfig cfg = config;
            cfg.strategy = strategies[i / config.seeds.size()];
            try {
                cells[i].record = run_al(dataset, cfg, cells[i].seed);
            } catch (const std::exception& e) {
                cells[i].error = e.what();
            }
        }
    };
    const auto n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(cells.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    return cells;
}

int thread_cap_from_env() {
    if (const char* v = std::getenv("ALCOVE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end != v && n > 0) return static_cast<int>(n);
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
    struct Acc {
        int n = 0;
        double mean = 0.0, m2 = 0.0;
    };
    std::map<std::pair<std::string, int>, Acc> acc;
    std::vector<std::pair<std::string, int>> order;
    for (const RunRecord& r : records) {
        for (const IterationRow& row : r.rows) {
            const auto key = std::make_pair(r.strategy, row.iteration);
            auto [it, inserted] = acc.try_emplace(key);
            if (inserted) order.push_back(key);
            Acc& a = it->second;
            ++a.n;
            const double delta = row.accuracy - a.mean;
            a.mean += delta / a.n;
            a.m2 += delta * (row.accuracy - a.mean);
        }
    }
    std::vector<SummaryRow> out;
    for (const auto& key : order) {
        const Acc& a = acc.at(key);
        out.push_back({key.first, key.second, a.n, a.mean, a.n > 1 ? std::sqrt(a.m2 / (a.n - 1)) : 0.0});
    }
    return out;
}

}  // namespace alcove
