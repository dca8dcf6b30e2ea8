#pragma once

#include <optional>
#include <span>

#include "zoneforge/core/types.hpp"
#include "zoneforge/eval/metrics.hpp"
#include "zoneforge/eval/stats.hpp"

namespace zoneforge::evalkit {

/// mean +/- sd of one map's voxel values inside one zone mask.
struct ZoneStats {
    Zone zone = Zone::PG;
    MapKind map = MapKind::SWS;
    double mean = 0.0, sd = 0.0;
    std::size_t n = 0; // n == 0 flags an empty zone
};

inline constexpr std::array<MapKind, 3> kTabulatedKinds = {MapKind::SWS, MapKind::Mag,
                                                           MapKind::Phi};

/// Per-zone voxel statistics of the case's SWS/mag/phi maps under the given
/// masks. Rows for empty zones carry n == 0.
std::vector<ZoneStats> tabulate(const CaseRecord& rec, const MaskSet& mask);

struct TabulationCell {
    double mean = 0.0, sd = 0.0;
    int n_cases = 0;
};

/// One report row per map kind: ground-truth and predicted columns per zone
/// plus the per-zone p-value of the GT-vs-predicted comparison of per-case
/// zone means. Cells aggregate per-case means across the cohort; empty zones
/// are excluded and never enter the test.
struct TabulationRow {
    MapKind map = MapKind::SWS;
    std::array<TabulationCell, 3> mask_cols;
    std::array<TabulationCell, 3> pred_cols;
    std::array<std::optional<double>, 3> p;
};

std::vector<TabulationRow> build_tabulation(std::span<const CaseRecord> cases,
                                            std::span<const MaskSet> predictions,
                                            bool paired = false);

} // namespace zoneforge::evalkit
