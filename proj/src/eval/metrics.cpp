#include "zoneforge/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zoneforge::evalkit {

const std::string& to_string(Zone z) {
    static const std::string names[3] = {"PG", "CZ", "PZ"};
    return names[static_cast<int>(z)];
}

double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size()) throw ShapeError("dice: mask sizes differ");
    std::size_t na = 0, nb = 0, inter = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i];
        nb += b[i];
        inter += a[i] & b[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

SenSpc sen_spc(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size()) throw ShapeError("sen_spc: mask sizes differ");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i]) {
            if (pred[i]) ++tp;
            else ++fn;
        } else {
            if (pred[i]) ++fp;
            else ++tn;
        }
    }
    SenSpc out;
    if (tp + fn == 0) {
        out.sen = 1.0;
        out.sen_degenerate = true;
    } else {
        out.sen = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (tn + fp == 0) {
        out.spc = 1.0;
        out.spc_degenerate = true;
    } else {
        out.spc = static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    return out;
}

namespace {

struct Pt2 {
    int x, y;
};

/// In-plane boundary pixels of one slice; out-of-grid neighbors count as
/// background so a mask touching the border still has a boundary there.
std::vector<Pt2> boundary_2d(const std::uint8_t* slice, int nx, int ny) {
    std::vector<Pt2> pts;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            if (!slice[y * nx + x]) continue;
            const bool edge = x == 0 || x == nx - 1 || y == 0 || y == ny - 1 ||
                              !slice[y * nx + x - 1] || !slice[y * nx + x + 1] ||
                              !slice[(y - 1) * nx + x] || !slice[(y + 1) * nx + x];
            if (edge) pts.push_back({x, y});
        }
    return pts;
}

/// max over a of min over b, squared mm distances; early exit once the running
/// minimum cannot raise the current maximum.
double directed_hd2_2d(const std::vector<Pt2>& a, const std::vector<Pt2>& b, double sx,
                       double sy) {
    double max2 = 0.0;
    for (const Pt2& pa : a) {
        double min2 = std::numeric_limits<double>::infinity();
        for (const Pt2& pb : b) {
            const double dx = (pa.x - pb.x) * sx;
            const double dy = (pa.y - pb.y) * sy;
            const double d2 = dx * dx + dy * dy;
            if (d2 < min2) {
                min2 = d2;
                if (min2 <= max2) break;
            }
        }
        if (min2 > max2) max2 = min2;
    }
    return max2;
}

struct Pt3 {
    int x, y, z;
};

std::vector<Pt3> boundary_3d(const std::vector<std::uint8_t>& m, const Dims& d) {
    std::vector<Pt3> pts;
    auto at = [&](int x, int y, int z) -> std::uint8_t {
        if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) return 0;
        return m[(static_cast<std::size_t>(z) * d[1] + y) * d[0] + x];
    };
    for (int z = 0; z < d[2]; ++z)
        for (int y = 0; y < d[1]; ++y)
            for (int x = 0; x < d[0]; ++x) {
                if (!at(x, y, z)) continue;
                if (!at(x - 1, y, z) || !at(x + 1, y, z) || !at(x, y - 1, z) ||
                    !at(x, y + 1, z) || !at(x, y, z - 1) || !at(x, y, z + 1))
                    pts.push_back({x, y, z});
            }
    return pts;
}

double directed_hd2_3d(const std::vector<Pt3>& a, const std::vector<Pt3>& b,
                       const Spacing& s) {
    double max2 = 0.0;
    for (const Pt3& pa : a) {
        double min2 = std::numeric_limits<double>::infinity();
        for (const Pt3& pb : b) {
            const double dx = (pa.x - pb.x) * s[0];
            const double dy = (pa.y - pb.y) * s[1];
            const double dz = (pa.z - pb.z) * s[2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < min2) {
                min2 = d2;
                if (min2 <= max2) break;
            }
        }
        if (min2 > max2) max2 = min2;
    }
    return max2;
}

bool any_set(const std::uint8_t* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (p[i]) return true;
    return false;
}

} // namespace

double hausdorff_mm(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                    const Dims& dims, const Spacing& spacing_mm, HdMode mode) {
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    if (a.size() != n || b.size() != n) throw ShapeError("hausdorff_mm: mask/dims mismatch");
    if (!any_set(a.data(), n)) throw EmptyMaskError("hausdorff_mm: first mask is empty");
    if (!any_set(b.data(), n)) throw EmptyMaskError("hausdorff_mm: second mask is empty");

    if (mode == HdMode::Volume3D) {
        const auto ba = boundary_3d(a, dims);
        const auto bb = boundary_3d(b, dims);
        return std::sqrt(
            std::max(directed_hd2_3d(ba, bb, spacing_mm), directed_hd2_3d(bb, ba, spacing_mm)));
    }

    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    double max2 = -1.0;
    for (int z = 0; z < dims[2]; ++z) {
        const std::uint8_t* sa = a.data() + static_cast<std::size_t>(z) * plane;
        const std::uint8_t* sb = b.data() + static_cast<std::size_t>(z) * plane;
        if (!any_set(sa, plane) || !any_set(sb, plane)) continue;
        const auto ba = boundary_2d(sa, dims[0], dims[1]);
        const auto bb = boundary_2d(sb, dims[0], dims[1]);
        const double d2 = std::max(directed_hd2_2d(ba, bb, spacing_mm[0], spacing_mm[1]),
                                   directed_hd2_2d(bb, ba, spacing_mm[0], spacing_mm[1]));
        max2 = std::max(max2, d2);
    }
    if (max2 < 0.0)
        throw EmptyMaskError("hausdorff_mm: no slice where both masks are present");
    return std::sqrt(max2);
}

std::vector<MetricsRow> evaluate_case(const std::string& case_id, const MaskSet& pred,
                                      const MaskSet& truth, HdMode mode) {
    if (pred.dims != truth.dims) throw ShapeError("evaluate_case: mask dims differ");
    std::vector<MetricsRow> rows;
    for (int zi = 0; zi < 3; ++zi) {
        const auto& p = pred.zone(zi);
        const auto& t = truth.zone(zi);
        MetricsRow row;
        row.case_id = case_id;
        row.zone = static_cast<Zone>(zi);
        row.dice = dice(p, t);
        row.dice_empty_pair =
            !any_set(p.data(), p.size()) && !any_set(t.data(), t.size());
        const SenSpc s = sen_spc(p, t);
        row.sen = s.sen;
        row.spc = s.spc;
        row.sen_degenerate = s.sen_degenerate;
        row.spc_degenerate = s.spc_degenerate;
        if (any_set(p.data(), p.size()) && any_set(t.data(), t.size())) {
            try {
                row.hd_mm = hausdorff_mm(p, t, truth.dims, truth.spacing_mm, mode);
            } catch (const EmptyMaskError&) {
                // 2D mode with no shared slice: leave HD undefined
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

AggCell agg_cell(std::vector<double> xs) {
    AggCell c;
    const std::size_t n = xs.size();
    double sum = 0.0;
    for (double x : xs) sum += x;
    c.mean = sum / static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - c.mean) * (x - c.mean);
        c.sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    std::sort(xs.begin(), xs.end());
    c.median = (n % 2 == 1) ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    return c;
}

} // namespace

std::map<Zone, ZoneAggregate> aggregate(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw StatsError("aggregate: no metric rows");
    std::map<Zone, ZoneAggregate> out;
    for (Zone z : {Zone::PG, Zone::CZ, Zone::PZ}) {
        std::vector<double> ds, sen, spc, hd;
        for (const auto& r : rows) {
            if (r.zone != z) continue;
            ds.push_back(r.dice);
            sen.push_back(r.sen);
            spc.push_back(r.spc);
            if (r.hd_mm) hd.push_back(*r.hd_mm);
        }
        if (ds.empty()) continue;
        ZoneAggregate agg;
        agg.zone = z;
        agg.n = static_cast<int>(ds.size());
        agg.hd_n = static_cast<int>(hd.size());
        agg.dice = agg_cell(std::move(ds));
        agg.sen = agg_cell(std::move(sen));
        agg.spc = agg_cell(std::move(spc));
        if (agg.hd_n > 0) agg.hd = agg_cell(std::move(hd));
        out.emplace(z, std::move(agg));
    }
    return out;
}

} // namespace zoneforge::evalkit
