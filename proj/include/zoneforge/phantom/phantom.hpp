#pragma once

#include <map>
#include <span>
#include <vector>

#include "zoneforge/core/rng.hpp"
#include "zoneforge/core/types.hpp"

namespace zoneforge::phantom {

struct GaussianLevel {
    double mean = 0.0;
    double sd = 0.0;
};

/// Per-zone intensity levels for one map kind. gland covers PG tissue outside
/// CZ and PZ (anterior stroma); its SWS/mag/phi defaults are solved from the
/// whole-gland mixture statistics so that PG-averaged values land on the
/// measured prostate numbers.
struct ZoneLevels {
    GaussianLevel background, cz, pz, gland;
};

/// Gaussian intensity statistics per zone and map kind. SWS/mag/phi defaults
/// come from measured prostate values; T2w/ADC defaults are synthetic choices
/// that reproduce the usual appearance (PZ bright on T2w, high ADC outside
/// the gland).
struct ZoneIntensityModel {
    std::map<MapKind, ZoneLevels> levels; // T2w, ADC, Mag, SWS, Phi (DWI_b is derived)

    static ZoneIntensityModel defaults();
    void validate() const;
};

/// Multi-b diffusion protocol. s0 holds the per-zone baseline signal used to
/// render an S0 volume; signal_noise_sd is the magnitude-noise level applied
/// to synthesized signals (scaled by PhantomConfig::noise_sd).
struct DwiProtocol {
    std::vector<double> b{0.0, 50.0, 500.0, 1000.0, 1400.0}; // s/mm^2
    struct {
        double background = 420.0, cz = 800.0, pz = 950.0, gland = 750.0;
    } s0;
    double signal_noise_sd = 2.0;

    void validate() const;

    /// Constant-S0 helper for protocol-level experiments.
    static VolumeGrid uniform_s0(Dims dims, Spacing spacing_mm, double s0);
};

struct PhantomConfig {
    Dims dims{64, 64, 9};
    Spacing spacing_mm{1.0, 1.0, 1.0};
    std::array<double, 3> pg_semiaxes_mm{20.0, 16.0, 3.5};
    std::array<double, 3> center_jitter_mm{2.0, 2.0, 0.5};
    double cz_fraction = 0.65;        // CZ = PG ellipsoid scaled by this
    double pz_thickness_frac = 0.35;  // posterior shell depth, fraction of PG
    double sigma_blur_vox = 1.5;      // in-plane Gaussian blur of the mean image
    double noise_sd = 1.0;            // global multiplier on all per-zone sds
    DwiProtocol dwi;
    ZoneIntensityModel intensities = ZoneIntensityModel::defaults();
    std::uint64_t seed = 1;

    void validate() const;

    /// Table-1-like MRE geometry: 128x128x25 at 2 mm isotropic.
    static PhantomConfig paper_scale();
};

/// Procedurally generates one co-registered six-map case with ground-truth
/// masks. Pure function of (cfg, rng): the same seed yields a bit-identical
/// case. case_id is stamped by the caller.
CaseRecord generate_case(const PhantomConfig& cfg, Rng rng);

/// Monoexponential DWI synthesis S(b) = S0 * exp(-b * ADC), one output volume
/// per b-value, noiseless. Throws InvariantError on any negative ADC voxel
/// and ShapeError when the grids disagree.
std::vector<VolumeGrid> synth_dwi(const VolumeGrid& adc, const VolumeGrid& s0,
                                  const DwiProtocol& proto);

struct AdcFit {
    VolumeGrid adc;
    std::size_t flagged = 0; // voxels with non-positive signal, forced to 0
};

/// Per-voxel least-squares slope of ln S over b, negated and clamped at 0.
AdcFit adc_fit(const std::vector<VolumeGrid>& signals, const DwiProtocol& proto);

/// Single-voxel fit used by adc_fit; exposed so it can be checked against an
/// independent normal-equations solve.
double adc_fit_voxel(std::span<const double> b, std::span<const double> signal);

} // namespace zoneforge::phantom
