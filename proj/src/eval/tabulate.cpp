#include "zoneforge/eval/tabulate.hpp"

#include <cmath>

namespace zoneforge::evalkit {

namespace {

ZoneStats zone_stats(const VolumeGrid& vol, const std::vector<std::uint8_t>& zone_mask,
                     Zone zone) {
    ZoneStats zs;
    zs.zone = zone;
    zs.map = vol.kind;
    double sum = 0.0;
    for (std::size_t i = 0; i < zone_mask.size(); ++i)
        if (zone_mask[i]) {
            sum += vol.values[i];
            ++zs.n;
        }
    if (zs.n == 0) return zs;
    zs.mean = sum / static_cast<double>(zs.n);
    if (zs.n > 1) {
        double ss = 0.0;
        for (std::size_t i = 0; i < zone_mask.size(); ++i)
            if (zone_mask[i]) ss += (vol.values[i] - zs.mean) * (vol.values[i] - zs.mean);
        zs.sd = std::sqrt(ss / static_cast<double>(zs.n - 1));
    }
    return zs;
}

TabulationCell cell_of(const std::vector<double>& case_means) {
    TabulationCell c;
    c.n_cases = static_cast<int>(case_means.size());
    if (case_means.empty()) return c;
    double sum = 0.0;
    for (double v : case_means) sum += v;
    c.mean = sum / case_means.size();
    if (case_means.size() > 1) {
        double ss = 0.0;
        for (double v : case_means) ss += (v - c.mean) * (v - c.mean);
        c.sd = std::sqrt(ss / static_cast<double>(case_means.size() - 1));
    }
    return c;
}

} // namespace

std::vector<ZoneStats> tabulate(const CaseRecord& rec, const MaskSet& mask) {
    if (mask.dims != rec.truth.dims)
        throw ShapeError("tabulate: mask dims do not match the case");
    std::vector<ZoneStats> out;
    for (MapKind kind : kTabulatedKinds) {
        const VolumeGrid& vol = rec.map(kind); // DataError when absent
        if (vol.dims != mask.dims)
            throw ShapeError("tabulate: map and mask are not co-registered");
        // voxels(cz) + voxels(pz) <= voxels(pg) holds by the mask invariants
        for (int zi = 0; zi < 3; ++zi)
            out.push_back(zone_stats(vol, mask.zone(zi), static_cast<Zone>(zi)));
    }
    return out;
}

std::vector<TabulationRow> build_tabulation(std::span<const CaseRecord> cases,
                                            std::span<const MaskSet> predictions,
                                            bool paired) {
    if (cases.size() != predictions.size())
        throw ShapeError("build_tabulation: one prediction per case required");
    if (cases.empty()) throw StatsError("build_tabulation: no cases");

    std::vector<TabulationRow> rows;
    for (MapKind kind : kTabulatedKinds) {
        TabulationRow row;
        row.map = kind;
        for (int zi = 0; zi < 3; ++zi) {
            std::vector<double> gt_means, pred_means;
            std::vector<double> gt_paired, pred_paired; // cases where both zones exist
            for (std::size_t ci = 0; ci < cases.size(); ++ci) {
                const VolumeGrid& vol = cases[ci].map(kind);
                const ZoneStats gt =
                    zone_stats(vol, cases[ci].truth.zone(zi), static_cast<Zone>(zi));
                const ZoneStats pr =
                    zone_stats(vol, predictions[ci].zone(zi), static_cast<Zone>(zi));
                if (gt.n > 0) gt_means.push_back(gt.mean);
                if (pr.n > 0) pred_means.push_back(pr.mean);
                if (gt.n > 0 && pr.n > 0) {
                    gt_paired.push_back(gt.mean);
                    pred_paired.push_back(pr.mean);
                }
            }
            row.mask_cols[zi] = cell_of(gt_means);
            row.pred_cols[zi] = cell_of(pred_means);
            try {
                const TTestResult t = paired ? paired_t(gt_paired, pred_paired)
                                             : welch_t(gt_means, pred_means);
                row.p[zi] = t.p;
            } catch (const StatsError&) {
                // too few cases or degenerate variance: leave the p-value blank
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace zoneforge::evalkit
