#include "zoneforge/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace zoneforge {

namespace {

const std::array<std::string, kMapKindCount> kKindNames = {"t2w", "dwi_b", "adc",
                                                           "mag", "sws",   "phi"};

void check_grid(const Dims& dims, const Spacing& spacing) {
    for (int axis = 0; axis < 3; ++axis) {
        if (dims[axis] <= 0)
            throw ShapeError("volume dims must be positive, got " + std::to_string(dims[axis]) +
                             " on axis " + std::to_string(axis));
        if (!(spacing[axis] > 0.0) || !std::isfinite(spacing[axis]))
            throw InvariantError("voxel spacing must be positive and finite");
    }
}

} // namespace

const std::string& to_string(MapKind kind) { return kKindNames[static_cast<int>(kind)]; }

MapKind map_kind_from_string(const std::string& name) {
    for (int i = 0; i < kMapKindCount; ++i)
        if (kKindNames[i] == name) return static_cast<MapKind>(i);
    throw FormatError("unknown map kind \"" + name + "\"");
}

VolumeGrid::VolumeGrid(MapKind kind, Dims dims, Spacing spacing_mm, std::vector<double> values)
    : kind(kind), dims(dims), spacing_mm(spacing_mm), values(std::move(values)) {
    validate();
}

void VolumeGrid::validate() const {
    check_grid(dims, spacing_mm);
    if (values.size() != size())
        throw ShapeError("volume value count " + std::to_string(values.size()) +
                         " does not match dims product " + std::to_string(size()));
    // All six kinds are bounded below by zero; phi additionally by pi/2.
    const double upper = (kind == MapKind::Phi) ? std::numbers::pi / 2.0
                                                : std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (!std::isfinite(v)) throw InvariantError("volume contains a non-finite value");
        if (v < 0.0)
            throw InvariantError("negative value in " + to_string(kind) + " map");
        if (v > upper)
            throw InvariantError("phi value " + std::to_string(v) + " exceeds pi/2");
    }
}

MaskSet::MaskSet(Dims dims, Spacing spacing_mm, std::vector<std::uint8_t> pg,
                 std::vector<std::uint8_t> cz, std::vector<std::uint8_t> pz)
    : dims(dims), spacing_mm(spacing_mm), pg(std::move(pg)), cz(std::move(cz)),
      pz(std::move(pz)) {
    validate();
}

const std::vector<std::uint8_t>& MaskSet::zone(int which) const {
    switch (which) {
    case 0: return pg;
    case 1: return cz;
    default: return pz;
    }
}

void MaskSet::validate() const {
    check_grid(dims, spacing_mm);
    const std::size_t n = size();
    if (pg.size() != n || cz.size() != n || pz.size() != n)
        throw ShapeError("mask zone length does not match dims product");
    for (std::size_t i = 0; i < n; ++i) {
        if (pg[i] > 1 || cz[i] > 1 || pz[i] > 1)
            throw FormatError("mask voxel outside {0,1} at linear index " + std::to_string(i));
        if (cz[i] && pz[i])
            throw InvariantError("cz and pz overlap at linear index " + std::to_string(i));
        if ((cz[i] || pz[i]) && !pg[i])
            throw InvariantError("zone voxel outside pg at linear index " + std::to_string(i));
    }
}

const std::string& to_string(SplitTag tag) {
    static const std::string train = "train", test = "test";
    return tag == SplitTag::Train ? train : test;
}

SplitTag split_tag_from_string(const std::string& name) {
    if (name == "train") return SplitTag::Train;
    if (name == "test") return SplitTag::Test;
    throw FormatError("unknown split tag \"" + name + "\"");
}

const VolumeGrid& CaseRecord::map(MapKind kind) const {
    auto it = maps.find(kind);
    if (it == maps.end())
        throw DataError("case " + case_id + " lacks map " + to_string(kind));
    return it->second;
}

bool CaseRecord::coregistered() const {
    for (const auto& [kind, vol] : maps) {
        if (vol.dims != truth.dims || vol.spacing_mm != truth.spacing_mm) return false;
    }
    return true;
}

namespace {

std::uint8_t bits_of(const std::vector<MapKind>& kinds) {
    std::uint8_t bits = 0;
    for (MapKind k : kinds) bits |= static_cast<std::uint8_t>(1u << static_cast<int>(k));
    return bits;
}

// The 14 admissible subsets: every non-empty subset of {mag, sws, phi} and
// every non-empty subset of {t2w, dwi_b, adc} (7 + 7).
std::vector<std::uint8_t> canonical_bits() {
    std::vector<std::uint8_t> out;
    const std::uint8_t mre[] = {static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::Mag)),
                                static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::SWS)),
                                static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::Phi))};
    const std::uint8_t mri[] = {static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::T2w)),
                                static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::DWI_b)),
                                static_cast<std::uint8_t>(1u << static_cast<int>(MapKind::ADC))};
    for (const auto& family : {mre, mri})
        for (std::uint8_t m = 1; m < 8; ++m) {
            std::uint8_t bits = 0;
            for (int i = 0; i < 3; ++i)
                if (m & (1u << i)) bits |= family[i];
            out.push_back(bits);
        }
    return out;
}

} // namespace

InputCombo InputCombo::parse(const std::vector<std::string>& names) {
    std::vector<MapKind> kinds;
    kinds.reserve(names.size());
    for (const auto& n : names) kinds.push_back(map_kind_from_string(n));
    return from_kinds(kinds);
}

InputCombo InputCombo::from_kinds(const std::vector<MapKind>& kinds) {
    const std::uint8_t bits = bits_of(kinds);
    static const std::vector<std::uint8_t> canon = canonical_bits();
    if (std::find(canon.begin(), canon.end(), bits) == canon.end()) {
        std::ostringstream msg;
        msg << "input combination {";
        bool first = true;
        for (MapKind k : kAllMapKinds)
            if (bits & (1u << static_cast<int>(k))) {
                msg << (first ? "" : ", ") << to_string(k);
                first = false;
            }
        msg << "} is not one of the 14 canonical combinations";
        if (bits == 0) msg << " (empty set)";
        throw ComboError(msg.str());
    }
    return InputCombo(bits);
}

const std::vector<InputCombo>& InputCombo::canonical_list() {
    static const std::vector<InputCombo> list = [] {
        std::vector<InputCombo> out;
        for (std::uint8_t bits : canonical_bits()) out.push_back(InputCombo(bits));
        return out;
    }();
    return list;
}

int InputCombo::channel_count() const {
    int n = 0;
    for (int i = 0; i < kMapKindCount; ++i)
        if (bits_ & (1u << i)) ++n;
    return n;
}

std::vector<MapKind> InputCombo::kinds() const {
    std::vector<MapKind> out;
    for (MapKind k : kAllMapKinds)
        if (contains(k)) out.push_back(k);
    return out;
}

std::string InputCombo::name() const {
    std::string out;
    for (MapKind k : kinds()) {
        if (!out.empty()) out += '+';
        out += to_string(k);
    }
    return out;
}

} // namespace zoneforge
