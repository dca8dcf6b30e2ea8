#include "zoneforge/eval/report.hpp"

#include <cstdio>
#include <fstream>

namespace zoneforge::evalkit {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::string num(double v, const char* fmt = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string pm(const TabulationCell& c) {
    if (c.n_cases == 0) return "n/a";
    return num(c.mean, "%.4g") + "±" + num(c.sd, "%.4g");
}

std::string pval(const std::optional<double>& p) {
    return p ? num(*p, "%.4g") : "n/a";
}

const char* kZoneKeys[3] = {"pg", "cz", "pz"};

} // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "case_id,zone,DS,Sen,Spc,HD_mm\n";
    for (const auto& r : rows) {
        out << r.case_id << ',' << to_string(r.zone) << ',' << num(r.dice) << ','
            << num(r.sen) << ',' << num(r.spc) << ','
            << (r.hd_mm ? num(*r.hd_mm) : std::string()) << '\n';
    }
}

void write_summary_csv(const std::string& model_name,
                       const std::map<Zone, ZoneAggregate>& agg,
                       const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "model";
    for (const char* zk : kZoneKeys)
        out << ',' << zk << "_dice," << zk << "_std," << zk << "_median," << zk << "_sen,"
            << zk << "_spc," << zk << "_hd";
    out << '\n';
    out << model_name;
    for (Zone z : {Zone::PG, Zone::CZ, Zone::PZ}) {
        const auto it = agg.find(z);
        if (it == agg.end()) {
            out << ",,,,,,";
            continue;
        }
        const ZoneAggregate& a = it->second;
        out << ',' << num(a.dice.mean, "%.4f") << ',' << num(a.dice.sd, "%.4f") << ','
            << num(a.dice.median, "%.4f") << ',' << num(a.sen.mean, "%.4f") << ','
            << num(a.spc.mean, "%.4f") << ','
            << (a.hd_n > 0 ? num(a.hd.mean, "%.4f") : std::string());
    }
    out << '\n';
}

void write_summary_markdown(const std::string& model_name,
                            const std::map<Zone, ZoneAggregate>& agg,
                            const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "| Model |";
    for (const char* zone : {"Prostate gland", "Central zone", "Peripheral zone"})
        out << " " << zone << " Dice | Std | Median | Sen | Spc | HD |";
    out << "\n|---|";
    for (int i = 0; i < 18; ++i) out << "---|";
    out << "\n| " << model_name << " |";
    for (Zone z : {Zone::PG, Zone::CZ, Zone::PZ}) {
        const auto it = agg.find(z);
        if (it == agg.end()) {
            out << " | | | | | |";
            continue;
        }
        const ZoneAggregate& a = it->second;
        out << ' ' << num(a.dice.mean, "%.2f") << " | " << num(a.dice.sd, "%.2f") << " | "
            << num(a.dice.median, "%.2f") << " | " << num(a.sen.mean, "%.2f") << " | "
            << num(a.spc.mean, "%.2f") << " | "
            << (a.hd_n > 0 ? num(a.hd.mean, "%.2f") : std::string("n/a")) << " |";
    }
    out << '\n';
}

void write_tabulation_csv(const std::vector<TabulationRow>& rows,
                          const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "Map,PG mask,PG predicted,CZ mask,CZ predicted,PZ mask,PZ predicted,"
           "PG P-value,CZ P-value,PZ P-value\n";
    for (const auto& r : rows) {
        out << to_string(r.map);
        for (int zi = 0; zi < 3; ++zi)
            out << ',' << pm(r.mask_cols[zi]) << ',' << pm(r.pred_cols[zi]);
        for (int zi = 0; zi < 3; ++zi) out << ',' << pval(r.p[zi]);
        out << '\n';
    }
}

void write_tabulation_markdown(const std::vector<TabulationRow>& rows,
                               const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "| Map | PG mask | PG predicted | CZ mask | CZ predicted | PZ mask | "
           "PZ predicted | PG P-value | CZ P-value | PZ P-value |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out << "| " << to_string(r.map) << " |";
        for (int zi = 0; zi < 3; ++zi)
            out << ' ' << pm(r.mask_cols[zi]) << " | " << pm(r.pred_cols[zi]) << " |";
        for (int zi = 0; zi < 3; ++zi) out << ' ' << pval(r.p[zi]) << " |";
        out << '\n';
    }
}

} // namespace zoneforge::evalkit
