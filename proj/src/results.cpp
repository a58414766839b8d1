#include "alcove/results.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace alcove {

using nlohmann::json;

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << kRecordsHeader << '\n';
    for (const RunRecord& r : records) {
        for (const IterationRow& row : r.rows) {
            out << fmt::format("{},{},{},{},{},", r.strategy, r.seed, row.iteration, row.labeled, row.accuracy);
            if (row.candidate_fraction) out << fmt::format("{}", *row.candidate_fraction);
            out << '\n';
        }
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

std::vector<RunRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("records file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordsHeader) throw std::runtime_error(fmt::format("unexpected records header '{}'", line));

    std::vector<RunRecord> out;
    std::map<std::pair<std::string, std::uint64_t>, std::size_t> where;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 6) throw std::runtime_error(fmt::format("line {}: expected 6 fields, got {}", lineno, f.size()));
        try {
            const auto key = std::make_pair(f[0], static_cast<std::uint64_t>(std::stoull(f[1])));
            auto [it, inserted] = where.try_emplace(key, out.size());
            if (inserted) {
                RunRecord r;
                r.strategy = key.first;
                r.seed = key.second;
                out.push_back(std::move(r));
            }
            IterationRow row;
            row.iteration = std::stoi(f[2]);
            row.labeled = std::stoll(f[3]);
            row.accuracy = std::stod(f[4]);
            if (!f[5].empty()) row.candidate_fraction = std::stod(f[5]);
            out[it->second].rows.push_back(row);
        } catch (const std::logic_error&) {
            throw std::runtime_error(fmt::format("line {}: malformed number", lineno));
        }
    }
    return out;
}

json config_to_json(const RunConfig& c) {
    const QuerySpec& s = c.strategy;
    json strategy = {{"id", s.id()},
                     {"kind", std::string(to_string(s.kind))},
                     {"mc_samples", s.mc_samples},
                     {"dq_m", s.dq_m},
                     {"dropout_rho", s.dropout_rho},
                     {"dq_literal", s.dq_literal},
                     {"power_beta", s.power_beta},
                     {"alfamix_eps_scale", s.alfamix_eps_scale},
                     {"typiclust_max_clusters", s.typiclust_max_clusters},
                     {"typiclust_knn", s.typiclust_knn},
                     {"probcover_purity", s.probcover_purity}};
    strategy["diversify"] = s.diversify ? json{{"multiplier", s.diversify->multiplier},
                                               {"inference_dropout", s.diversify->inference_dropout}}
                                        : json(nullptr);
    strategy["probcover_delta"] = s.probcover_delta ? json(*s.probcover_delta) : json(nullptr);
    return {{"iterations", c.iterations},
            {"seeds", c.seeds},
            {"budget", c.budget},
            {"init", std::string(to_string(c.init))},
            {"semisupervised", c.semisupervised},
            {"propagation_alpha", c.propagation_alpha},
            {"propagation_knn", c.propagation_knn},
            {"train",
             {{"learning_rate", c.train.learning_rate},
              {"weight_decay", c.train.weight_decay},
              {"dropout_rho", c.train.dropout_rho},
              {"epochs", c.train.epochs}}},
            {"strategy", strategy}};
}

json results_metadata(const json& config_echo, const std::vector<BenchCell>& cells) {
    json jcells = json::array();
    for (const BenchCell& c : cells) {
        json jc = {{"strategy", c.strategy}, {"seed", c.seed}};
        if (c.record) {
            json times = json::array();
            json truncated = nullptr;
            for (const auto& row : c.record->rows) {
                times.push_back(row.wall_time);
                if (row.truncated) truncated = row.iteration;
            }
            jc["wall_time"] = times;
            jc["truncated_at"] = truncated;
            jc["oracle_queries"] = c.record->oracle_queries;
        } else {
            jc["error"] = c.error;
        }
        jcells.push_back(jc);
    }
    return {{"schema_version", kResultsSchemaVersion}, {"config", config_echo}, {"cells", jcells}};
}

void write_win_matrix_csv(std::ostream& out, const WinMatrix& m) {
    out << "strategy";
    for (const auto& s : m.strategies) out << ',' << s;
    out << '\n';
    for (Index i = 0; i < m.wins.rows(); ++i) {
        out << m.strategies[i];
        for (Index j = 0; j < m.wins.cols(); ++j) out << fmt::format(",{}", m.wins(i, j));
        out << '\n';
    }
}

json win_matrix_json(const WinMatrix& m) {
    auto rows = [](const Matrix& w) {
        json a = json::array();
        for (Index i = 0; i < w.rows(); ++i) {
            json r = json::array();
            for (Index j = 0; j < w.cols(); ++j) r.push_back(w(i, j));
            a.push_back(r);
        }
        return a;
    };
    json per = json::array();
    for (std::size_t d = 0; d < m.datasets.size(); ++d)
        per.push_back({{"dataset", m.datasets[d]}, {"wins", rows(m.per_dataset[d])}});
    return {{"schema_version", kResultsSchemaVersion},
            {"threshold", kSignificanceThreshold},
            {"strategies", m.strategies},
            {"wins", rows(m.wins)},
            {"per_dataset", per}};
}

}  // namespace alcove
