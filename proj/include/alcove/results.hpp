#pragma once

#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "alcove/harness.hpp"
#include "alcove/stats.hpp"

namespace alcove {

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kRecordsHeader = "strategy,seed,iteration,labeled,accuracy,candidate_fraction";

// One CSV row per iteration; reals use the shortest round-trip form and an
// absent candidate fraction is an empty field. wall_time is not written, so
// reruns produce identical bytes.
void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);

// Parses what write_records_csv emits. Rows of one (strategy, seed) form
// one record. Throws std::runtime_error with the offending line number.
std::vector<RunRecord> read_records_csv(std::istream& in);

// Sidecar with the schema version, the config echo and per-row timings.
nlohmann::json results_metadata(const nlohmann::json& config_echo, const std::vector<BenchCell>& cells);

nlohmann::json config_to_json(const RunConfig& config);

void write_win_matrix_csv(std::ostream& out, const WinMatrix& m);
nlohmann::json win_matrix_json(const WinMatrix& m);

}  // namespace alcove
