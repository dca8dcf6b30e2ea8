#pragma once

#include <filesystem>

#include "zoneforge/eval/metrics.hpp"
#include "zoneforge/eval/tabulate.hpp"

namespace zoneforge::evalkit {

/// metrics.csv: case_id, zone, DS, Sen, Spc, HD_mm (HD blank when undefined).
void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path);

/// summary.csv: one row per model with the per-zone column groups
/// Dice, Std, Median, Sen, Spc, HD for PG, CZ and PZ.
void write_summary_csv(const std::string& model_name,
                       const std::map<Zone, ZoneAggregate>& agg,
                       const std::filesystem::path& path);
void write_summary_markdown(const std::string& model_name,
                            const std::map<Zone, ZoneAggregate>& agg,
                            const std::filesystem::path& path);

/// tabulation.csv: Map | PG mask | PG predicted | CZ mask | CZ predicted |
/// PZ mask | PZ predicted | PG P-value | CZ P-value | PZ P-value.
void write_tabulation_csv(const std::vector<TabulationRow>& rows,
                          const std::filesystem::path& path);
void write_tabulation_markdown(const std::vector<TabulationRow>& rows,
                               const std::filesystem::path& path);

} // namespace zoneforge::evalkit
