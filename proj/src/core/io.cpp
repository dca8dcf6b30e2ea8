#include "zoneforge/core/io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace zoneforge {

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> keys,
                  const std::string& what) {
    for (const char* k : keys)
        if (!j.contains(k)) throw FormatError(what + " header missing key \"" + k + "\"");
}

json parse_header_line(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(what + ": missing header line");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(what + ": header is not valid JSON");
    return j;
}

Dims dims_from_json(const json& j) {
    auto arr = j.get<std::vector<int>>();
    if (arr.size() != 3) throw FormatError("dims must have 3 entries");
    return {arr[0], arr[1], arr[2]};
}

Spacing spacing_from_json(const json& j) {
    auto arr = j.get<std::vector<double>>();
    if (arr.size() != 3) throw FormatError("spacing_mm must have 3 entries");
    return {arr[0], arr[1], arr[2]};
}

void write_f32le(std::ostream& out, const std::vector<double>& values) {
    std::vector<unsigned char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        buf[4 * i + 0] = static_cast<unsigned char>(u & 0xFF);
        buf[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xFF);
        buf[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xFF);
        buf[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_f32le(std::istream& in, std::size_t count, const std::string& what) {
    std::vector<unsigned char> buf(count * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw FormatError(what + ": payload shorter than header dims require");
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(what + ": payload longer than header dims require");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i]) |
                                (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        values[i] = static_cast<double>(f);
    }
    return values;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

} // namespace

void write_volume(const VolumeGrid& v, const std::filesystem::path& path) {
    v.validate();
    auto out = open_out(path);
    json header = {{"kind", to_string(v.kind)},
                   {"dims", v.dims},
                   {"spacing_mm", v.spacing_mm},
                   {"dtype", "f32le"}};
    out << header.dump() << '\n';
    write_f32le(out, v.values);
    if (!out) throw IoError("write failed for " + path.string());
}

VolumeGrid read_volume(const std::filesystem::path& path) {
    auto in = open_in(path);
    json header = parse_header_line(in, "volume");
    require_keys(header, {"kind", "dims", "spacing_mm", "dtype"}, "volume");
    if (header["dtype"] != "f32le")
        throw FormatError("volume dtype must be f32le, got " + header["dtype"].dump());
    const MapKind kind = map_kind_from_string(header["kind"].get<std::string>());
    const Dims dims = dims_from_json(header["dims"]);
    const Spacing spacing = spacing_from_json(header["spacing_mm"]);
    for (int d : dims)
        if (d <= 0) throw FormatError("volume header dims must be positive");
    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    return VolumeGrid(kind, dims, spacing, read_f32le(in, count, "volume"));
}

void write_mask(const MaskSet& m, const std::filesystem::path& path) {
    m.validate();
    auto out = open_out(path);
    json header = {{"dims", m.dims},
                   {"spacing_mm", m.spacing_mm},
                   {"zones", {"pg", "cz", "pz"}},
                   {"dtype", "u8"}};
    out << header.dump() << '\n';
    for (const auto* zone : {&m.pg, &m.cz, &m.pz})
        out.write(reinterpret_cast<const char*>(zone->data()),
                  static_cast<std::streamsize>(zone->size()));
    if (!out) throw IoError("write failed for " + path.string());
}

MaskSet read_mask(const std::filesystem::path& path) {
    auto in = open_in(path);
    json header = parse_header_line(in, "mask");
    require_keys(header, {"dims", "spacing_mm", "zones", "dtype"}, "mask");
    if (header["dtype"] != "u8")
        throw FormatError("mask dtype must be u8, got " + header["dtype"].dump());
    const Dims dims = dims_from_json(header["dims"]);
    const Spacing spacing = spacing_from_json(header["spacing_mm"]);
    for (int d : dims)
        if (d <= 0) throw FormatError("mask header dims must be positive");
    const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::array<std::vector<std::uint8_t>, 3> zones;
    for (auto& zone : zones) {
        zone.resize(count);
        in.read(reinterpret_cast<char*>(zone.data()), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in.gcount()) != count)
            throw FormatError("mask: payload shorter than header dims require");
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("mask: payload longer than header dims require");
    // MaskSet's constructor distinguishes FormatError (non-{0,1} bytes) from
    // InvariantError (zone inconsistency).
    return MaskSet(dims, spacing, std::move(zones[0]), std::move(zones[1]), std::move(zones[2]));
}

const ManifestEntry& Manifest::find(const std::string& case_id) const {
    for (const auto& e : cases)
        if (e.case_id == case_id) return e;
    throw DataError("manifest has no case \"" + case_id + "\"");
}

std::vector<const ManifestEntry*> Manifest::with_split(SplitTag tag) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : cases)
        if (e.split == tag) out.push_back(&e);
    return out;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    json cases = json::array();
    for (const auto& e : m.cases) {
        json maps = json::object();
        for (const auto& [kind, rel] : e.map_paths) maps[to_string(kind)] = rel;
        cases.push_back({{"case_id", e.case_id},
                         {"split", to_string(e.split)},
                         {"maps", maps},
                         {"mask", e.mask_path}});
    }
    auto out = open_out(path);
    out << json{{"cases", cases}}.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
    auto in = open_in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("manifest is not valid JSON: " + path.string());
    if (!j.contains("cases") || !j["cases"].is_array())
        throw FormatError("manifest missing \"cases\" array");
    Manifest m;
    for (const auto& c : j["cases"]) {
        require_keys(c, {"case_id", "split", "maps", "mask"}, "manifest case");
        ManifestEntry e;
        e.case_id = c["case_id"].get<std::string>();
        e.split = split_tag_from_string(c["split"].get<std::string>());
        e.mask_path = c["mask"].get<std::string>();
        for (const auto& [key, value] : c["maps"].items())
            e.map_paths[map_kind_from_string(key)] = value.get<std::string>();
        m.cases.push_back(std::move(e));
    }
    return m;
}

CaseRecord load_case(const ManifestEntry& entry, const std::filesystem::path& base_dir) {
    CaseRecord rec;
    rec.case_id = entry.case_id;
    rec.split = entry.split;
    for (const auto& [kind, rel] : entry.map_paths) {
        VolumeGrid v = read_volume(base_dir / rel);
        if (v.kind != kind)
            throw FormatError("manifest lists " + rel + " as " + to_string(kind) +
                              " but the file header says " + to_string(v.kind));
        rec.maps.emplace(kind, std::move(v));
    }
    rec.truth = read_mask(base_dir / entry.mask_path);
    return rec;
}

ManifestEntry save_case(const CaseRecord& rec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ManifestEntry e;
    e.case_id = rec.case_id;
    e.split = rec.split;
    for (const auto& [kind, vol] : rec.maps) {
        const std::string rel = rec.case_id + "_" + to_string(kind) + ".mvol";
        write_volume(vol, dir / rel);
        e.map_paths[kind] = rel;
    }
    e.mask_path = rec.case_id + ".mmask";
    write_mask(rec.truth, dir / e.mask_path);
    return e;
}

} // namespace zoneforge
