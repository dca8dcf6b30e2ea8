#include "zoneforge/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace zoneforge::phantom {

namespace {

enum class Region : std::uint8_t { Background = 0, Gland = 1, Cz = 2, Pz = 3 };

const GaussianLevel& level_of(const ZoneLevels& levels, Region r) {
    switch (r) {
    case Region::Background: return levels.background;
    case Region::Pz: return levels.pz;
    case Region::Cz: return levels.cz;
    default: return levels.gland;
    }
}

double s0_of(const DwiProtocol& proto, Region r) {
    switch (r) {
    case Region::Background: return proto.s0.background;
    case Region::Pz: return proto.s0.pz;
    case Region::Cz: return proto.s0.cz;
    default: return proto.s0.gland;
    }
}

/// In-plane separable Gaussian blur, kernel truncated at ceil(3*sigma) (or the
/// axis extent) and renormalized at borders so constants stay exact.
void blur_inplane(std::vector<double>& values, const Dims& dims, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::min<int>(static_cast<int>(std::ceil(3.0 * sigma)),
                                     std::max(dims[0], dims[1]) - 1);
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));

    const int nx = dims[0], ny = dims[1], nz = dims[2];
    std::vector<double> tmp(static_cast<std::size_t>(nx) * ny);
    for (int z = 0; z < nz; ++z) {
        double* slice = values.data() + static_cast<std::size_t>(z) * nx * ny;
        // x pass
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                double acc = 0.0, wsum = 0.0;
                const int lo = std::max(0, x - radius), hi = std::min(nx - 1, x + radius);
                for (int u = lo; u <= hi; ++u) {
                    const double w = kernel[u - x + radius];
                    acc += w * slice[y * nx + u];
                    wsum += w;
                }
                tmp[y * nx + x] = acc / wsum;
            }
        }
        // y pass
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                double acc = 0.0, wsum = 0.0;
                const int lo = std::max(0, y - radius), hi = std::min(ny - 1, y + radius);
                for (int v = lo; v <= hi; ++v) {
                    const double w = kernel[v - y + radius];
                    acc += w * tmp[v * nx + x];
                    wsum += w;
                }
                slice[y * nx + x] = acc / wsum;
            }
        }
    }
}

double clamp_for_kind(MapKind kind, double v) {
    const double hi = (kind == MapKind::Phi) ? std::numbers::pi / 2.0
                                             : std::numeric_limits<double>::infinity();
    return std::clamp(v, 0.0, hi);
}

} // namespace

ZoneIntensityModel ZoneIntensityModel::defaults() {
    // CZ/PZ means and sds are measured zonal values; the gland (anterior
    // stroma) level is solved so that the CZ/PZ/stroma volume mixture of the
    // default geometry reproduces the measured whole-PG statistics.
    ZoneIntensityModel m;
    m.levels[MapKind::SWS] = {{0.85, 0.25}, {1.25, 0.32}, {1.39, 0.22}, {1.23, 0.39}};
    m.levels[MapKind::Mag] = {{12.0, 5.0}, {29.6, 7.85}, {43.21, 7.2}, {26.4, 8.0}};
    m.levels[MapKind::Phi] = {{0.30, 0.10}, {0.64, 0.17}, {0.58, 0.09}, {0.63, 0.19}};
    m.levels[MapKind::T2w] = {{60.0, 20.0}, {110.0, 30.0}, {180.0, 25.0}, {90.0, 25.0}};
    // ADC in mm^2/s; periprostatic tissue is closer to free water, stroma is
    // fibromuscular and restricted.
    m.levels[MapKind::ADC] = {
        {2.0e-3, 3.5e-4}, {1.30e-3, 2.0e-4}, {1.60e-3, 2.5e-4}, {1.10e-3, 2.0e-4}};
    return m;
}

void ZoneIntensityModel::validate() const {
    for (const auto& [kind, lv] : levels) {
        for (const auto* g : {&lv.background, &lv.cz, &lv.pz, &lv.gland}) {
            if (g->sd < 0.0) throw ConfigError("negative sd for " + to_string(kind));
            if ((kind == MapKind::SWS || kind == MapKind::ADC || kind == MapKind::Mag) &&
                g->mean <= 0.0)
                throw ConfigError(to_string(kind) + " mean must be positive");
            if (kind == MapKind::Phi &&
                (g->mean <= 0.0 || g->mean >= std::numbers::pi / 2.0))
                throw ConfigError("phi mean must lie in (0, pi/2)");
        }
    }
}

void DwiProtocol::validate() const {
    if (b.size() < 2) throw ConfigError("DWI protocol needs at least 2 b-values");
    if (b.front() != 0.0) throw ConfigError("first b-value must be 0");
    for (std::size_t i = 1; i < b.size(); ++i)
        if (!(b[i] > b[i - 1])) throw ConfigError("b-values must be strictly increasing");
    if (signal_noise_sd < 0.0) throw ConfigError("signal noise sd must be >= 0");
}

VolumeGrid DwiProtocol::uniform_s0(Dims dims, Spacing spacing_mm, double s0) {
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    return VolumeGrid(MapKind::DWI_b, dims, spacing_mm, std::vector<double>(n, s0));
}

void PhantomConfig::validate() const {
    if (!(cz_fraction > 0.0 && cz_fraction < 1.0))
        throw ConfigError("cz_fraction must lie in (0,1)");
    if (!(pz_thickness_frac > 0.0 && pz_thickness_frac <= 1.0))
        throw ConfigError("pz_thickness_frac must lie in (0,1]");
    if (sigma_blur_vox < 0.0 || noise_sd < 0.0)
        throw ConfigError("sigma_blur_vox and noise_sd must be >= 0");
    for (int axis = 0; axis < 3; ++axis) {
        if (pg_semiaxes_mm[axis] <= 0.0) throw ConfigError("semi-axes must be positive");
        if (center_jitter_mm[axis] < 0.0) throw ConfigError("center jitter must be >= 0");
        const double extent = dims[axis] * spacing_mm[axis];
        const double reach = extent / 2.0 + center_jitter_mm[axis] + pg_semiaxes_mm[axis];
        if (reach > extent)
            throw ConfigError("PG ellipsoid can exceed the grid on axis " +
                              std::to_string(axis) + " (" + std::to_string(reach) + " mm > " +
                              std::to_string(extent) + " mm)");
    }
    dwi.validate();
    intensities.validate();
}

PhantomConfig PhantomConfig::paper_scale() {
    PhantomConfig cfg;
    cfg.dims = {128, 128, 25};
    cfg.spacing_mm = {2.0, 2.0, 2.0};
    cfg.pg_semiaxes_mm = {36.0, 30.0, 20.0};
    cfg.center_jitter_mm = {4.0, 4.0, 2.0};
    return cfg;
}

CaseRecord generate_case(const PhantomConfig& cfg, Rng rng) {
    cfg.validate();
    const Dims dims = cfg.dims;
    const Spacing sp = cfg.spacing_mm;
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];

    std::array<double, 3> center;
    for (int axis = 0; axis < 3; ++axis)
        center[axis] = dims[axis] * sp[axis] / 2.0 +
                       rng.uniform(-cfg.center_jitter_mm[axis], cfg.center_jitter_mm[axis]);

    // Region labels. PZ is the posterior shell of PG outside the pz-inner
    // ellipsoid and outside CZ; everything else inside PG is gland tissue.
    std::vector<Region> label(n, Region::Background);
    std::vector<std::uint8_t> pg(n, 0), cz(n, 0), pz(n, 0);
    const double pz_inner = 1.0 - cfg.pz_thickness_frac;
    auto ellipsoid_r2 = [&](double px, double py, double pzz, double scale) {
        double r2 = 0.0;
        const double p[3] = {px, py, pzz};
        for (int axis = 0; axis < 3; ++axis) {
            const double d = (p[axis] - center[axis]) / (scale * cfg.pg_semiaxes_mm[axis]);
            r2 += d * d;
        }
        return r2;
    };
    std::size_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x, ++i) {
                const double px = (x + 0.5) * sp[0];
                const double py = (y + 0.5) * sp[1];
                const double pzmm = (z + 0.5) * sp[2];
                if (ellipsoid_r2(px, py, pzmm, 1.0) > 1.0) continue;
                pg[i] = 1;
                label[i] = Region::Gland;
                if (ellipsoid_r2(px, py, pzmm, cfg.cz_fraction) <= 1.0) {
                    cz[i] = 1;
                    label[i] = Region::Cz;
                } else if (py > center[1] &&
                           (pz_inner <= 0.0 || ellipsoid_r2(px, py, pzmm, pz_inner) > 1.0)) {
                    pz[i] = 1;
                    label[i] = Region::Pz;
                }
            }

    CaseRecord rec;
    rec.truth = MaskSet(dims, sp, std::move(pg), std::move(cz), std::move(pz));

    // Scalar maps: blurred per-region mean image + per-region Gaussian noise.
    auto make_map = [&](MapKind kind, Rng stream) {
        const ZoneLevels& lv = cfg.intensities.levels.at(kind);
        std::vector<double> vals(n);
        for (std::size_t v = 0; v < n; ++v) vals[v] = level_of(lv, label[v]).mean;
        blur_inplane(vals, dims, cfg.sigma_blur_vox);
        if (cfg.noise_sd > 0.0)
            for (std::size_t v = 0; v < n; ++v)
                vals[v] += cfg.noise_sd * level_of(lv, label[v]).sd * stream.normal();
        for (std::size_t v = 0; v < n; ++v) vals[v] = clamp_for_kind(kind, vals[v]);
        return VolumeGrid(kind, dims, sp, std::move(vals));
    };

    rec.maps.emplace(MapKind::T2w, make_map(MapKind::T2w, rng.split(0)));
    rec.maps.emplace(MapKind::Mag, make_map(MapKind::Mag, rng.split(1)));
    rec.maps.emplace(MapKind::SWS, make_map(MapKind::SWS, rng.split(2)));
    rec.maps.emplace(MapKind::Phi, make_map(MapKind::Phi, rng.split(3)));

    // DWI chain: true ADC field -> monoexponential signals (+ magnitude noise)
    // -> stored DWI_b image and scanner-style refitted ADC map.
    const VolumeGrid adc_true = make_map(MapKind::ADC, rng.split(4));
    std::vector<double> s0_vals(n);
    for (std::size_t v = 0; v < n; ++v) s0_vals[v] = s0_of(cfg.dwi, label[v]);
    blur_inplane(s0_vals, dims, cfg.sigma_blur_vox);
    const VolumeGrid s0(MapKind::DWI_b, dims, sp, std::move(s0_vals));

    std::vector<VolumeGrid> signals = synth_dwi(adc_true, s0, cfg.dwi);
    const double sig_sd = cfg.noise_sd * cfg.dwi.signal_noise_sd;
    if (sig_sd > 0.0) {
        Rng stream = rng.split(5);
        for (auto& vol : signals)
            for (double& v : vol.values) v = std::abs(v + sig_sd * stream.normal());
    }
    rec.maps.emplace(MapKind::DWI_b, signals.back());
    rec.maps.emplace(MapKind::ADC, adc_fit(signals, cfg.dwi).adc);
    return rec;
}

std::vector<VolumeGrid> synth_dwi(const VolumeGrid& adc, const VolumeGrid& s0,
                                  const DwiProtocol& proto) {
    proto.validate();
    if (!adc.same_grid(s0) || adc.size() != s0.size())
        throw ShapeError("ADC and S0 grids disagree");
    for (double v : adc.values)
        if (v < 0.0) throw InvariantError("negative ADC voxel in synth_dwi");
    std::vector<VolumeGrid> out;
    out.reserve(proto.b.size());
    for (double b : proto.b) {
        std::vector<double> vals(adc.size());
        for (std::size_t i = 0; i < vals.size(); ++i)
            vals[i] = s0.values[i] * std::exp(-b * adc.values[i]);
        out.emplace_back(MapKind::DWI_b, adc.dims, adc.spacing_mm, std::move(vals));
    }
    return out;
}

double adc_fit_voxel(std::span<const double> b, std::span<const double> signal) {
    const std::size_t m = b.size();
    double b_mean = 0.0, l_mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        b_mean += b[i];
        l_mean += std::log(signal[i]);
    }
    b_mean /= static_cast<double>(m);
    l_mean /= static_cast<double>(m);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double db = b[i] - b_mean;
        num += db * (std::log(signal[i]) - l_mean);
        den += db * db;
    }
    return std::max(0.0, -num / den);
}

AdcFit adc_fit(const std::vector<VolumeGrid>& signals, const DwiProtocol& proto) {
    proto.validate();
    if (signals.size() != proto.b.size())
        throw ShapeError("signal volume count does not match b-value count");
    for (const auto& s : signals)
        if (!s.same_grid(signals.front()))
            throw ShapeError("signal volumes are not co-registered");

    const std::size_t n = signals.front().size();
    const std::size_t m = signals.size();
    std::vector<double> adc(n, 0.0);
    std::vector<double> s(m);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < m; ++k) {
            s[k] = signals[k].values[i];
            ok = ok && s[k] > 0.0;
        }
        if (!ok) {
            ++flagged;
            continue; // stays 0
        }
        adc[i] = adc_fit_voxel(proto.b, s);
    }
    return {VolumeGrid(MapKind::ADC, signals.front().dims, signals.front().spacing_mm,
                       std::move(adc)),
            flagged};
}

} // namespace zoneforge::phantom
