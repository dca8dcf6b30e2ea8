#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zoneforge/core/errors.hpp"

namespace zoneforge {

/// The six co-registered image kinds a case can carry, in canonical channel
/// order. Serialized names are the lowercase strings below.
enum class MapKind : int { T2w = 0, DWI_b = 1, ADC = 2, Mag = 3, SWS = 4, Phi = 5 };

inline constexpr int kMapKindCount = 6;

inline constexpr std::array<MapKind, kMapKindCount> kAllMapKinds = {
    MapKind::T2w, MapKind::DWI_b, MapKind::ADC, MapKind::Mag, MapKind::SWS, MapKind::Phi};

const std::string& to_string(MapKind kind);

/// Parses the serialized name ("t2w", "dwi_b", "adc", "mag", "sws", "phi").
/// Throws FormatError for anything else.
MapKind map_kind_from_string(const std::string& name);

using Dims = std::array<int, 3>;        // (nx, ny, nz), x fastest in memory
using Spacing = std::array<double, 3>;  // (sx, sy, sz) in mm

/// One scalar 3D map. Values are stored x-fastest row-major as float64 in
/// memory; the on-disk payload is f32le (see io.hpp). Construction validates
/// finiteness and the per-kind value range (SWS/ADC/Mag/T2w/DWI_b >= 0,
/// Phi in [0, pi/2]).
struct VolumeGrid {
    MapKind kind = MapKind::Mag;
    Dims dims{0, 0, 0};
    Spacing spacing_mm{1.0, 1.0, 1.0};
    std::vector<double> values;

    VolumeGrid() = default;
    VolumeGrid(MapKind kind, Dims dims, Spacing spacing_mm, std::vector<double> values);

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    double at(int x, int y, int z) const { return values[index(x, y, z)]; }
    double& at(int x, int y, int z) { return values[index(x, y, z)]; }

    bool same_grid(const VolumeGrid& other) const {
        return dims == other.dims && spacing_mm == other.spacing_mm;
    }

    /// Re-checks all invariants; throws InvariantError/ShapeError on failure.
    void validate() const;

    bool operator==(const VolumeGrid&) const = default;
};

/// Co-registered binary masks of prostate gland (pg), central zone (cz) and
/// peripheral zone (pz). Invariants enforced on every construction and
/// deserialization: values in {0,1}, cz and pz disjoint, both inside pg.
struct MaskSet {
    Dims dims{0, 0, 0};
    Spacing spacing_mm{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> pg, cz, pz;

    MaskSet() = default;
    MaskSet(Dims dims, Spacing spacing_mm, std::vector<std::uint8_t> pg,
            std::vector<std::uint8_t> cz, std::vector<std::uint8_t> pz);

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }

    const std::vector<std::uint8_t>& zone(int which) const; // 0=pg 1=cz 2=pz

    void validate() const;

    bool operator==(const MaskSet&) const = default;
};

enum class SplitTag { Train, Test };

const std::string& to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& name);

/// One subject: any subset of the six maps plus the ground-truth masks.
struct CaseRecord {
    std::string case_id;
    std::map<MapKind, VolumeGrid> maps;
    MaskSet truth;
    SplitTag split = SplitTag::Train;

    bool has(MapKind kind) const { return maps.count(kind) != 0; }
    const VolumeGrid& map(MapKind kind) const;

    /// True when all present maps and the truth masks share dims and spacing.
    bool coregistered() const;
};

/// An ordered non-empty subset of the six map kinds, restricted to the
/// canonical 14-combination list. Channel order is always canonical
/// (T2w, DWI_b, ADC, Mag, SWS, Phi) regardless of how it was spelled.
class InputCombo {
public:
    /// Validates a set of serialized kind names; throws ComboError (naming the
    /// offending set) when the subset is not one of the 14.
    static InputCombo parse(const std::vector<std::string>& names);
    static InputCombo from_kinds(const std::vector<MapKind>& kinds);

    /// All 14 canonical combinations (7 MRE-family, 7 MRI-family).
    static const std::vector<InputCombo>& canonical_list();

    bool contains(MapKind kind) const { return (bits_ & (1u << static_cast<int>(kind))) != 0; }
    int channel_count() const;
    /// Member kinds in canonical order.
    std::vector<MapKind> kinds() const;
    /// Canonical display name, e.g. "mag+sws+phi".
    std::string name() const;

    bool operator==(const InputCombo&) const = default;
    auto operator<=>(const InputCombo&) const = default;

private:
    explicit InputCombo(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

} // namespace zoneforge
