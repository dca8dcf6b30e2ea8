#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zoneforge/core/types.hpp"

namespace zoneforge::evalkit {

enum class Zone : int { PG = 0, CZ = 1, PZ = 2 };

const std::string& to_string(Zone z);

/// Dice overlap 2|A∩B| / (|A|+|B|). Both masks empty is defined as 1.0 (the
/// segmentations agree); empty-vs-nonempty is 0.
double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

struct SenSpc {
    double sen = 0.0, spc = 0.0;
    bool sen_degenerate = false, spc_degenerate = false; // zero denominators, value forced to 1
};

/// Sensitivity TP/(TP+FN) and specificity TN/(TN+FP) of pred against truth.
SenSpc sen_spc(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth);

enum class HdMode { Slice2D, Volume3D };

/// Symmetric Hausdorff distance between boundary voxels, in mm. The default
/// evaluates each slice in 2D (boundary = mask voxel with a face-adjacent
/// in-plane background voxel, grid border counts as background) and takes the
/// maximum over slices where both masks are present; Volume3D uses 6-neighbor
/// boundaries and 3D distances. Throws EmptyMaskError when either mask is
/// empty (or, in 2D mode, when no slice holds both).
double hausdorff_mm(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                    const Dims& dims, const Spacing& spacing_mm, HdMode mode = HdMode::Slice2D);

struct MetricsRow {
    std::string case_id;
    Zone zone = Zone::PG;
    double dice = 0.0;
    double sen = 0.0, spc = 0.0;
    std::optional<double> hd_mm; // absent when either mask is empty
    bool dice_empty_pair = false;
    bool sen_degenerate = false, spc_degenerate = false;
};

/// One row per zone for a predicted/truth mask pair.
std::vector<MetricsRow> evaluate_case(const std::string& case_id, const MaskSet& pred,
                                      const MaskSet& truth, HdMode mode = HdMode::Slice2D);

struct AggCell {
    double mean = 0.0, sd = 0.0, median = 0.0;
};

struct ZoneAggregate {
    Zone zone = Zone::PG;
    AggCell dice, sen, spc, hd;
    int n = 0;    // rows aggregated
    int hd_n = 0; // rows with a defined HD
};

/// Per-zone mean / sample sd (n-1) / midpoint median for each metric.
std::map<Zone, ZoneAggregate> aggregate(const std::vector<MetricsRow>& rows);

} // namespace zoneforge::evalkit
