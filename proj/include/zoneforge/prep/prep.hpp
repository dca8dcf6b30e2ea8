#pragma once

#include <vector>

#include "zoneforge/core/rng.hpp"
#include "zoneforge/core/types.hpp"

namespace zoneforge::prep {

/// Resample-and-crop settings. Images are interpolated trilinearly, masks with
/// nearest-neighbor; both are fixed choices (they are the only ones that keep
/// intensities bounded and masks binary).
struct PrepConfig {
    double target_spacing_mm = 0.5;
    int crop_size = 256; // in-plane window, pixels

    void validate() const;
};

/// Simard-style elastic deformation parameters: displacement = alpha * G_sigma
/// applied to i.i.d. uniform[-1,1] noise, one 2D field per slice.
struct ElasticParams {
    double alpha = 21.0;  // amplitude bound, pixels
    double sigma = 512.0; // Gaussian smoothing std, pixels
    int n_augment = 9;    // deformed copies per original case

    void validate() const;
};

/// Per-pixel (dx, dy) displacements for one slice, in pixels.
struct DisplacementField2D {
    int width = 0, height = 0;
    std::vector<double> dx, dy;

    double max_abs() const;
};

enum class Interp { Linear, Nearest };

/// Resamples to isotropic target spacing on all three axes. Output axis length
/// is round(n * spacing / target), at least 1. Linear interpolation never
/// leaves the input value range.
VolumeGrid resample(const VolumeGrid& v, const PrepConfig& cfg);

/// Nearest-neighbor resampling applied jointly to all three zones, so the
/// zone-consistency invariants survive exactly.
MaskSet resample_mask(const MaskSet& m, const PrepConfig& cfg);

/// Centered in-plane crop to crop_size x crop_size; regions outside the input
/// are zero-filled. Idempotent. The z axis is untouched.
VolumeGrid center_crop(const VolumeGrid& v, const PrepConfig& cfg);
MaskSet center_crop_mask(const MaskSet& m, const PrepConfig& cfg);

/// resample + center_crop for every map and the truth masks of a case.
CaseRecord prep_case(const CaseRecord& rec, const PrepConfig& cfg);

/// Draws one smoothed random displacement field. The Gaussian kernel is
/// truncated at ceil(3*sigma) or the field extent (whichever is smaller) and
/// normalized, so |dx|,|dy| <= alpha always holds.
DisplacementField2D sample_displacement(int width, int height, const ElasticParams& p, Rng& rng);

/// Warps one slice: out(x, y) = in(x + dx, y + dy), bilinear for images,
/// nearest for masks; out-of-domain reads return 0.
std::vector<double> warp_slice(const std::vector<double>& src, int width, int height,
                               const DisplacementField2D& field, Interp interp);

/// Applies one field to an entire slice of the mask set (all three zones share
/// the field and the nearest-neighbor lookup, preserving containment and
/// disjointness exactly).
void warp_mask_slice(MaskSet& m, int z, const DisplacementField2D& field);

/// Produces p.n_augment deformed copies of a case, ids suffixed "_aug1..n".
/// Within one copy, each slice gets a single field shared by every map and
/// every mask zone of that slice.
std::vector<CaseRecord> augment_case(const CaseRecord& rec, const ElasticParams& p, Rng& rng);

} // namespace zoneforge::prep
