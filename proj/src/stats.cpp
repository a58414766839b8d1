#include "alcove/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace alcove {

double paired_t_stat(std::span<const double> diffs) {
    if (diffs.size() < 2) throw std::invalid_argument("paired_t_stat: need at least two paired differences");
    const auto n = static_cast<double>(diffs.size());
    double mu = 0.0;
    for (double d : diffs) mu += d;
    mu /= n;
    double ss = 0.0;
    for (double d : diffs) ss += (d - mu) * (d - mu);
    if (ss == 0.0) {
        if (mu > 0.0) return std::numeric_limits<double>::infinity();
        if (mu < 0.0) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }
    // sqrt(n) * mu / sqrt(ss / n), arranged so that exact inputs stay exact.
    return mu * std::sqrt(n * n / ss);
}

namespace {

using Series = std::map<std::uint64_t, std::map<int, double>>;  // seed -> iteration -> accuracy

Series to_series(const std::vector<RunRecord>& records) {
    Series s;
    for (const RunRecord& r : records) {
        if (s.count(r.seed)) throw std::invalid_argument(fmt::format("duplicate record for seed {}", r.seed));
        auto& it = s[r.seed];
        for (const IterationRow& row : r.rows) it[row.iteration] = row.accuracy;
    }
    return s;
}

}  // namespace

std::vector<double> paired_t_series(const std::vector<RunRecord>& records_i,
                                    const std::vector<RunRecord>& records_j) {
    const Series a = to_series(records_i);
    const Series b = to_series(records_j);
    if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(),
                                            [](const auto& x, const auto& y) { return x.first == y.first; }))
        throw std::invalid_argument(fmt::format("mismatched seeds: {} vs {} records", a.size(), b.size()));
    if (a.empty()) return {};

    std::set<int> common;
    for (const auto& [iter, acc] : a.begin()->second) common.insert(iter);
    auto restrict = [&](const Series& s) {
        for (const auto& [seed, rows] : s) {
            std::set<int> keep;
            for (int t : common)
                if (rows.count(t)) keep.insert(t);
            common.swap(keep);
        }
    };
    restrict(a);
    restrict(b);

    std::vector<double> out;
    std::vector<double> diffs;
    for (int t : common) {
        diffs.clear();
        for (const auto& [seed, rows] : a) diffs.push_back(rows.at(t) - b.at(seed).at(t));
        out.push_back(paired_t_stat(diffs));
    }
    return out;
}

double win_fraction(const std::vector<RunRecord>& records_i, const std::vector<RunRecord>& records_j) {
    const std::vector<double> c = paired_t_series(records_i, records_j);
    if (c.empty()) return 0.0;
    const auto wins = std::count_if(c.begin(), c.end(), surpasses);
    return static_cast<double>(wins) / static_cast<double>(c.size());
}

WinMatrix win_matrix(const std::vector<DatasetRecords>& groups) {
    WinMatrix m;
    for (const auto& g : groups)
        for (const auto& r : g.records)
            if (std::find(m.strategies.begin(), m.strategies.end(), r.strategy) == m.strategies.end())
                m.strategies.push_back(r.strategy);
    const auto n = static_cast<Index>(m.strategies.size());
    m.wins = Matrix::Zero(n, n);

    for (const auto& g : groups) {
        std::map<std::string, std::vector<RunRecord>> by_strategy;
        for (const auto& r : g.records) by_strategy[r.strategy].push_back(r);
        Matrix w = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto a = by_strategy.find(m.strategies[i]);
                const auto b = by_strategy.find(m.strategies[j]);
                if (a == by_strategy.end() || b == by_strategy.end()) continue;
                try {
                    w(i, j) = win_fraction(a->second, b->second);
                } catch (const std::invalid_argument& e) {
                    throw std::invalid_argument(fmt::format("{}: {} vs {}: {}", g.name, m.strategies[i],
                                                            m.strategies[j], e.what()));
                }
            }
        }
        m.wins += w;
        m.datasets.push_back(g.name);
        m.per_dataset.push_back(std::move(w));
    }
    return m;
}

}  // namespace alcove
