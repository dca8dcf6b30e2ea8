#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zoneforge/core/types.hpp"

namespace zoneforge {

/// Volume file (.mvol): one UTF-8 JSON header line
///   {"kind":...,"dims":[nx,ny,nz],"spacing_mm":[sx,sy,sz],"dtype":"f32le"}
/// terminated by '\n', followed by nx*ny*nz little-endian float32 values in
/// x-fastest order. Values round-trip bit-exactly at float32 precision.
void write_volume(const VolumeGrid& v, const std::filesystem::path& path);
VolumeGrid read_volume(const std::filesystem::path& path);

/// Mask file (.mmask): JSON header line
///   {"dims":...,"spacing_mm":...,"zones":["pg","cz","pz"],"dtype":"u8"}
/// followed by three consecutive u8 payload blocks (pg, cz, pz), one byte per
/// voxel. Zone invariants are re-validated on read; violations are errors,
/// never repaired.
void write_mask(const MaskSet& m, const std::filesystem::path& path);
MaskSet read_mask(const std::filesystem::path& path);

/// Dataset manifest: which files belong to which case, plus the split tag.
struct ManifestEntry {
    std::string case_id;
    SplitTag split = SplitTag::Train;
    std::map<MapKind, std::string> map_paths; // relative to the manifest dir
    std::string mask_path;
};

struct Manifest {
    std::vector<ManifestEntry> cases;

    const ManifestEntry& find(const std::string& case_id) const;
    std::vector<const ManifestEntry*> with_split(SplitTag tag) const;
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Loads every file referenced by the entry (paths resolved against base_dir).
CaseRecord load_case(const ManifestEntry& entry, const std::filesystem::path& base_dir);

/// Writes all maps + masks of a case into dir as <case_id>_<kind>.mvol /
/// <case_id>.mmask and returns the matching manifest entry.
ManifestEntry save_case(const CaseRecord& rec, const std::filesystem::path& dir);

} // namespace zoneforge
