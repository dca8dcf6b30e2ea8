#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "zoneforge/core/errors.hpp"

namespace zoneforge {

/// Loads a JSON config file and rejects unknown keys: silent misconfiguration
/// is the usual failure mode of pipeline tools.
inline nlohmann::json load_config_strict(const std::filesystem::path& path,
                                         const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path.string());
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key \"" + key + "\" in " + path.string());
    return j;
}

/// FNV-1a hash of a file's bytes, for provenance records.
inline std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace zoneforge
