#include "zoneforge/prep/prep.hpp"

#include <algorithm>
#include <cmath>

namespace zoneforge::prep {

namespace {

int resampled_len(int n, double spacing, double target) {
    return std::max(1, static_cast<int>(std::llround(n * spacing / target)));
}

/// Source coordinate (voxel-center convention) for output index i.
double src_coord(int i, double s_out, double s_in, int n_in) {
    const double c = (i + 0.5) * s_out / s_in - 0.5;
    return std::clamp(c, 0.0, static_cast<double>(n_in - 1));
}

struct AxisMap {
    std::vector<int> lo;      // floor index
    std::vector<double> frac; // weight of lo+1
    std::vector<int> nearest;
};

AxisMap build_axis(int n_out, double s_out, double s_in, int n_in) {
    AxisMap m;
    m.lo.resize(n_out);
    m.frac.resize(n_out);
    m.nearest.resize(n_out);
    for (int i = 0; i < n_out; ++i) {
        const double c = src_coord(i, s_out, s_in, n_in);
        int lo = static_cast<int>(std::floor(c));
        lo = std::clamp(lo, 0, n_in - 1);
        m.lo[i] = lo;
        m.frac[i] = std::clamp(c - lo, 0.0, 1.0);
        m.nearest[i] = std::clamp(static_cast<int>(std::lround(c)), 0, n_in - 1);
    }
    return m;
}

int hi_index(int lo, int n_in) { return std::min(lo + 1, n_in - 1); }

template <typename Fetch>
std::vector<double> trilinear(const Dims& in_dims, const Dims& out_dims, const AxisMap& ax,
                              const AxisMap& ay, const AxisMap& az, Fetch src) {
    std::vector<double> out(static_cast<std::size_t>(out_dims[0]) * out_dims[1] * out_dims[2]);
    std::size_t o = 0;
    for (int z = 0; z < out_dims[2]; ++z) {
        const int z0 = az.lo[z], z1 = hi_index(z0, in_dims[2]);
        const double tz = az.frac[z];
        for (int y = 0; y < out_dims[1]; ++y) {
            const int y0 = ay.lo[y], y1 = hi_index(y0, in_dims[1]);
            const double ty = ay.frac[y];
            for (int x = 0; x < out_dims[0]; ++x, ++o) {
                const int x0 = ax.lo[x], x1 = hi_index(x0, in_dims[0]);
                const double tx = ax.frac[x];
                const double c00 = src(x0, y0, z0) + tx * (src(x1, y0, z0) - src(x0, y0, z0));
                const double c10 = src(x0, y1, z0) + tx * (src(x1, y1, z0) - src(x0, y1, z0));
                const double c01 = src(x0, y0, z1) + tx * (src(x1, y0, z1) - src(x0, y0, z1));
                const double c11 = src(x0, y1, z1) + tx * (src(x1, y1, z1) - src(x0, y1, z1));
                const double c0 = c00 + ty * (c10 - c00);
                const double c1 = c01 + ty * (c11 - c01);
                out[o] = c0 + tz * (c1 - c0);
            }
        }
    }
    return out;
}

} // namespace

void PrepConfig::validate() const {
    if (!(target_spacing_mm > 0.0)) throw ConfigError("target_spacing_mm must be positive");
    if (crop_size <= 0 || crop_size % 2 != 0)
        throw ConfigError("crop_size must be positive and even");
}

void ElasticParams::validate() const {
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (n_augment < 0) throw ConfigError("n_augment must be >= 0");
}

double DisplacementField2D::max_abs() const {
    double m = 0.0;
    for (double v : dx) m = std::max(m, std::abs(v));
    for (double v : dy) m = std::max(m, std::abs(v));
    return m;
}

VolumeGrid resample(const VolumeGrid& v, const PrepConfig& cfg) {
    cfg.validate();
    const double t = cfg.target_spacing_mm;
    const Dims out_dims = {resampled_len(v.dims[0], v.spacing_mm[0], t),
                           resampled_len(v.dims[1], v.spacing_mm[1], t),
                           resampled_len(v.dims[2], v.spacing_mm[2], t)};
    const AxisMap ax = build_axis(out_dims[0], t, v.spacing_mm[0], v.dims[0]);
    const AxisMap ay = build_axis(out_dims[1], t, v.spacing_mm[1], v.dims[1]);
    const AxisMap az = build_axis(out_dims[2], t, v.spacing_mm[2], v.dims[2]);
    auto vals = trilinear(v.dims, out_dims, ax, ay, az,
                          [&](int x, int y, int z) { return v.at(x, y, z); });
    return VolumeGrid(v.kind, out_dims, {t, t, t}, std::move(vals));
}

MaskSet resample_mask(const MaskSet& m, const PrepConfig& cfg) {
    cfg.validate();
    const double t = cfg.target_spacing_mm;
    const Dims out_dims = {resampled_len(m.dims[0], m.spacing_mm[0], t),
                           resampled_len(m.dims[1], m.spacing_mm[1], t),
                           resampled_len(m.dims[2], m.spacing_mm[2], t)};
    const AxisMap ax = build_axis(out_dims[0], t, m.spacing_mm[0], m.dims[0]);
    const AxisMap ay = build_axis(out_dims[1], t, m.spacing_mm[1], m.dims[1]);
    const AxisMap az = build_axis(out_dims[2], t, m.spacing_mm[2], m.dims[2]);
    const std::size_t n = static_cast<std::size_t>(out_dims[0]) * out_dims[1] * out_dims[2];
    std::vector<std::uint8_t> pg(n), cz(n), pz(n);
    std::size_t o = 0;
    for (int z = 0; z < out_dims[2]; ++z)
        for (int y = 0; y < out_dims[1]; ++y)
            for (int x = 0; x < out_dims[0]; ++x, ++o) {
                const std::size_t s = m.index(ax.nearest[x], ay.nearest[y], az.nearest[z]);
                pg[o] = m.pg[s];
                cz[o] = m.cz[s];
                pz[o] = m.pz[s];
            }
    return MaskSet(out_dims, {t, t, t}, std::move(pg), std::move(cz), std::move(pz));
}

VolumeGrid center_crop(const VolumeGrid& v, const PrepConfig& cfg) {
    cfg.validate();
    const int c = cfg.crop_size;
    const int ox = static_cast<int>(std::floor((v.dims[0] - c) / 2.0));
    const int oy = static_cast<int>(std::floor((v.dims[1] - c) / 2.0));
    const Dims out_dims = {c, c, v.dims[2]};
    std::vector<double> vals(static_cast<std::size_t>(c) * c * v.dims[2], 0.0);
    for (int z = 0; z < v.dims[2]; ++z)
        for (int y = 0; y < c; ++y) {
            const int sy = y + oy;
            if (sy < 0 || sy >= v.dims[1]) continue;
            for (int x = 0; x < c; ++x) {
                const int sx = x + ox;
                if (sx < 0 || sx >= v.dims[0]) continue;
                vals[(static_cast<std::size_t>(z) * c + y) * c + x] = v.at(sx, sy, z);
            }
        }
    return VolumeGrid(v.kind, out_dims, v.spacing_mm, std::move(vals));
}

MaskSet center_crop_mask(const MaskSet& m, const PrepConfig& cfg) {
    cfg.validate();
    const int c = cfg.crop_size;
    const int ox = static_cast<int>(std::floor((m.dims[0] - c) / 2.0));
    const int oy = static_cast<int>(std::floor((m.dims[1] - c) / 2.0));
    const Dims out_dims = {c, c, m.dims[2]};
    const std::size_t n = static_cast<std::size_t>(c) * c * m.dims[2];
    std::vector<std::uint8_t> pg(n, 0), cz(n, 0), pz(n, 0);
    for (int z = 0; z < m.dims[2]; ++z)
        for (int y = 0; y < c; ++y) {
            const int sy = y + oy;
            if (sy < 0 || sy >= m.dims[1]) continue;
            for (int x = 0; x < c; ++x) {
                const int sx = x + ox;
                if (sx < 0 || sx >= m.dims[0]) continue;
                const std::size_t o = (static_cast<std::size_t>(z) * c + y) * c + x;
                const std::size_t s = m.index(sx, sy, z);
                pg[o] = m.pg[s];
                cz[o] = m.cz[s];
                pz[o] = m.pz[s];
            }
        }
    return MaskSet(out_dims, m.spacing_mm, std::move(pg), std::move(cz), std::move(pz));
}

CaseRecord prep_case(const CaseRecord& rec, const PrepConfig& cfg) {
    CaseRecord out;
    out.case_id = rec.case_id;
    out.split = rec.split;
    for (const auto& [kind, vol] : rec.maps)
        out.maps.emplace(kind, center_crop(resample(vol, cfg), cfg));
    out.truth = center_crop_mask(resample_mask(rec.truth, cfg), cfg);
    return out;
}

namespace {

/// Separable normalized Gaussian smoothing of one scalar field, borders
/// renormalized. Kernel radius = min(ceil(3*sigma), extent-1).
void smooth_field(std::vector<double>& f, int width, int height, double sigma) {
    const int radius =
        std::min(static_cast<int>(std::ceil(3.0 * sigma)), std::max(width, height) - 1);
    if (radius <= 0) return;
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    std::vector<double> tmp(f.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0, wsum = 0.0;
            const int lo = std::max(0, x - radius), hi = std::min(width - 1, x + radius);
            for (int u = lo; u <= hi; ++u) {
                const double w = kernel[u - x + radius];
                acc += w * f[y * width + u];
                wsum += w;
            }
            tmp[y * width + x] = acc / wsum;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0, wsum = 0.0;
            const int lo = std::max(0, y - radius), hi = std::min(height - 1, y + radius);
            for (int v = lo; v <= hi; ++v) {
                const double w = kernel[v - y + radius];
                acc += w * tmp[v * width + x];
                wsum += w;
            }
            f[y * width + x] = acc / wsum;
        }
}

} // namespace

DisplacementField2D sample_displacement(int width, int height, const ElasticParams& p,
                                        Rng& rng) {
    p.validate();
    DisplacementField2D f;
    f.width = width;
    f.height = height;
    f.dx.resize(static_cast<std::size_t>(width) * height);
    f.dy.resize(f.dx.size());
    for (double& v : f.dx) v = rng.uniform(-1.0, 1.0);
    for (double& v : f.dy) v = rng.uniform(-1.0, 1.0);
    smooth_field(f.dx, width, height, p.sigma);
    smooth_field(f.dy, width, height, p.sigma);
    for (double& v : f.dx) v *= p.alpha;
    for (double& v : f.dy) v *= p.alpha;
    return f;
}

std::vector<double> warp_slice(const std::vector<double>& src, int width, int height,
                               const DisplacementField2D& field, Interp interp) {
    if (field.width != width || field.height != height)
        throw ShapeError("displacement field dims do not match the slice");
    if (src.size() != static_cast<std::size_t>(width) * height)
        throw ShapeError("slice length does not match dims");
    std::vector<double> out(src.size(), 0.0);
    auto fetch = [&](int x, int y) -> double {
        if (x < 0 || x >= width || y < 0 || y >= height) return 0.0;
        return src[static_cast<std::size_t>(y) * width + x];
    };
    std::size_t i = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x, ++i) {
            const double sx = x + field.dx[i];
            const double sy = y + field.dy[i];
            if (interp == Interp::Nearest) {
                const long rx = std::lround(sx), ry = std::lround(sy);
                if (rx >= 0 && rx < width && ry >= 0 && ry < height)
                    out[i] = src[static_cast<std::size_t>(ry) * width + rx];
            } else {
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const double tx = sx - x0, ty = sy - y0;
                const double v00 = fetch(x0, y0), v10 = fetch(x0 + 1, y0);
                const double v01 = fetch(x0, y0 + 1), v11 = fetch(x0 + 1, y0 + 1);
                out[i] = (1 - ty) * ((1 - tx) * v00 + tx * v10) +
                         ty * ((1 - tx) * v01 + tx * v11);
            }
        }
    return out;
}

void warp_mask_slice(MaskSet& m, int z, const DisplacementField2D& field) {
    const int w = m.dims[0], h = m.dims[1];
    if (field.width != w || field.height != h)
        throw ShapeError("displacement field dims do not match the mask slice");
    const std::size_t base = static_cast<std::size_t>(z) * w * h;
    std::vector<std::uint8_t> pg(static_cast<std::size_t>(w) * h, 0), cz(pg), pz(pg);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x, ++i) {
            const long rx = std::lround(x + field.dx[i]);
            const long ry = std::lround(y + field.dy[i]);
            if (rx < 0 || rx >= w || ry < 0 || ry >= h) continue;
            const std::size_t s = base + static_cast<std::size_t>(ry) * w + rx;
            pg[i] = m.pg[s];
            cz[i] = m.cz[s];
            pz[i] = m.pz[s];
        }
    std::copy(pg.begin(), pg.end(), m.pg.begin() + base);
    std::copy(cz.begin(), cz.end(), m.cz.begin() + base);
    std::copy(pz.begin(), pz.end(), m.pz.begin() + base);
}

std::vector<CaseRecord> augment_case(const CaseRecord& rec, const ElasticParams& p, Rng& rng) {
    p.validate();
    if (!rec.coregistered())
        throw ShapeError("augment_case needs a co-registered (preprocessed) case");
    std::vector<CaseRecord> out;
    out.reserve(p.n_augment);
    const int w = rec.truth.dims[0], h = rec.truth.dims[1], nz = rec.truth.dims[2];
    for (int j = 1; j <= p.n_augment; ++j) {
        CaseRecord aug = rec;
        aug.case_id = rec.case_id + "_aug" + std::to_string(j);
        for (int z = 0; z < nz; ++z) {
            const DisplacementField2D field = sample_displacement(w, h, p, rng);
            for (auto& [kind, vol] : aug.maps) {
                const std::size_t base = static_cast<std::size_t>(z) * w * h;
                std::vector<double> slice(vol.values.begin() + base,
                                          vol.values.begin() + base + w * h);
                auto warped = warp_slice(slice, w, h, field, Interp::Linear);
                std::copy(warped.begin(), warped.end(), vol.values.begin() + base);
            }
            warp_mask_slice(aug.truth, z, field);
        }
        aug.truth.validate();
        out.push_back(std::move(aug));
    }
    return out;
}

} // namespace zoneforge::prep
