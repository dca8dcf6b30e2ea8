#include "zoneforge/cli/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "zoneforge/core/io.hpp"
#include "zoneforge/eval/report.hpp"
#include "zoneforge/phantom/phantom.hpp"
#include "zoneforge/prep/prep.hpp"
#include "zoneforge/train/trainer.hpp"
#include "zoneforge/util/config.hpp"
#include "zoneforge/util/parallel.hpp"
#include "zoneforge/util/png.hpp"

namespace zoneforge::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "zoneforge 0.1.0";

struct Common {
    std::string config;
    std::string data;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool deterministic = false;
    bool verbose = false;

    int workers() const { return deterministic ? 1 : (threads > 0 ? threads : default_threads()); }
};

void add_common(CLI::App* cmd, Common& c, bool needs_data, bool needs_out) {
    if (needs_data) cmd->add_option("--data", c.data, "dataset directory (with manifest.json)")
        ->required();
    if (needs_out) cmd->add_option("--out", c.out, "output directory")->required();
    cmd->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) {
        c.seed_set = true;
    });
    cmd->add_option("--threads", c.threads, "worker threads (default: ZONEFORGE_THREADS)");
    cmd->add_flag("--deterministic", c.deterministic,
                  "single-threaded bit-reproducible mode; timing fields are zeroed");
    cmd->add_flag("-v,--verbose", c.verbose, "print configuration details");
}

void write_run_record(const Common& c, const std::string& subcommand,
                      const std::vector<std::string>& args, double wall_s) {
    const std::string dir = c.out.empty() ? c.data : c.out;
    if (dir.empty()) return;
    json j = {{"tool", kVersion},
              {"subcommand", subcommand},
              {"args", args},
              {"seed", c.seed},
              {"threads", c.workers()},
              {"deterministic", c.deterministic},
              {"wall_time_s", c.deterministic ? 0.0 : wall_s}};
    if (!c.config.empty()) j["config_hash"] = file_hash_hex(c.config);
    std::ofstream out(fs::path(dir) / "run.json");
    out << j.dump(2) << '\n';
}

// ---- config parsing ---------------------------------------------------------

phantom::PhantomConfig parse_phantom_config(const std::string& path,
                                            const std::string& scale) {
    phantom::PhantomConfig cfg = scale == "paper" ? phantom::PhantomConfig::paper_scale()
                                                  : phantom::PhantomConfig{};
    if (path.empty()) return cfg;
    const json j = load_config_strict(
        path, {"dims", "spacing_mm", "pg_semiaxes_mm", "center_jitter_mm", "cz_fraction",
               "pz_thickness_frac", "sigma_blur_vox", "noise_sd", "b_values", "dwi_s0",
               "dwi_signal_noise_sd", "seed", "intensities"});
    auto triple = [](const json& a, auto& out) {
        if (a.size() != 3) throw ConfigError("expected a 3-element array");
        for (int i = 0; i < 3; ++i) out[i] = a[i];
    };
    if (j.contains("dims")) triple(j["dims"], cfg.dims);
    if (j.contains("spacing_mm")) triple(j["spacing_mm"], cfg.spacing_mm);
    if (j.contains("pg_semiaxes_mm")) triple(j["pg_semiaxes_mm"], cfg.pg_semiaxes_mm);
    if (j.contains("center_jitter_mm")) triple(j["center_jitter_mm"], cfg.center_jitter_mm);
    if (j.contains("cz_fraction")) cfg.cz_fraction = j["cz_fraction"];
    if (j.contains("pz_thickness_frac")) cfg.pz_thickness_frac = j["pz_thickness_frac"];
    if (j.contains("sigma_blur_vox")) cfg.sigma_blur_vox = j["sigma_blur_vox"];
    if (j.contains("noise_sd")) cfg.noise_sd = j["noise_sd"];
    if (j.contains("b_values")) cfg.dwi.b = j["b_values"].get<std::vector<double>>();
    if (j.contains("dwi_signal_noise_sd")) cfg.dwi.signal_noise_sd = j["dwi_signal_noise_sd"];
    if (j.contains("dwi_s0")) {
        const json& s = j["dwi_s0"];
        for (const auto& [key, value] : s.items()) {
            if (key == "background") cfg.dwi.s0.background = value;
            else if (key == "cz") cfg.dwi.s0.cz = value;
            else if (key == "pz") cfg.dwi.s0.pz = value;
            else if (key == "gland") cfg.dwi.s0.gland = value;
            else throw ConfigError("unknown dwi_s0 zone \"" + key + "\"");
        }
    }
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("intensities")) {
        for (const auto& [kind_name, levels] : j["intensities"].items()) {
            const MapKind kind = map_kind_from_string(kind_name);
            phantom::ZoneLevels& lv = cfg.intensities.levels[kind];
            for (const auto& [zone, pair] : levels.items()) {
                if (pair.size() != 2) throw ConfigError("intensity entries are [mean, sd]");
                phantom::GaussianLevel g{pair[0], pair[1]};
                if (zone == "background") lv.background = g;
                else if (zone == "cz") lv.cz = g;
                else if (zone == "pz") lv.pz = g;
                else if (zone == "gland") lv.gland = g;
                else throw ConfigError("unknown intensity zone \"" + zone + "\"");
            }
        }
    }
    return cfg;
}

struct PrepFileConfig {
    prep::PrepConfig prep;
    prep::ElasticParams elastic;
    std::uint64_t seed = 1;
};

PrepFileConfig parse_prep_config(const std::string& path) {
    PrepFileConfig cfg;
    if (path.empty()) return cfg;
    const json j = load_config_strict(path, {"target_spacing_mm", "crop_size", "image_interp",
                                             "mask_interp", "alpha", "sigma", "n_augment",
                                             "seed"});
    if (j.contains("target_spacing_mm")) cfg.prep.target_spacing_mm = j["target_spacing_mm"];
    if (j.contains("crop_size")) cfg.prep.crop_size = j["crop_size"];
    if (j.contains("image_interp") && j["image_interp"] != "linear")
        throw ConfigError("image_interp supports only \"linear\"");
    if (j.contains("mask_interp") && j["mask_interp"] != "nearest")
        throw ConfigError("mask_interp supports only \"nearest\"");
    if (j.contains("alpha")) cfg.elastic.alpha = j["alpha"];
    if (j.contains("sigma")) cfg.elastic.sigma = j["sigma"];
    if (j.contains("n_augment")) cfg.elastic.n_augment = j["n_augment"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    return cfg;
}

struct TrainFileConfig {
    train::Regime regime = train::Regime::im(InputCombo::parse({"mag"}));
    train::ArchConfig arch = train::ArchConfig::desk(1);
    train::OptimizerConfig opt;
    std::uint64_t seed = 1;
};

InputCombo combo_from_name(const std::string& name) {
    std::vector<std::string> parts;
    std::string tok;
    for (char c : name) {
        if (c == '+') {
            parts.push_back(tok);
            tok.clear();
        } else
            tok += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    parts.push_back(tok);
    return InputCombo::parse(parts);
}

TrainFileConfig parse_train_config(const std::string& path) {
    TrainFileConfig cfg;
    if (path.empty()) throw ConfigError("train needs --config train.json");
    const json j = load_config_strict(path, {"regime", "combo", "arch", "learning_rate",
                                             "momentum", "decay", "decay_mode", "zone_weights",
                                             "batch_size", "epochs", "seed"});
    const std::string regime = j.value("regime", "im");
    if (regime == "im") {
        if (!j.contains("combo")) throw ConfigError("IM regime needs a \"combo\"");
        cfg.regime = train::Regime::im(combo_from_name(j["combo"].get<std::string>()));
    } else if (regime == "um") {
        cfg.regime = train::Regime::um();
    } else {
        throw ConfigError("regime must be \"im\" or \"um\"");
    }

    const int in_c = cfg.regime.in_channels();
    if (!j.contains("arch") || j["arch"].is_string()) {
        const std::string preset = j.value("arch", "desk");
        if (preset == "desk") cfg.arch = train::ArchConfig::desk(in_c);
        else if (preset == "paper") cfg.arch = train::ArchConfig::paper(in_c);
        else if (preset == "toy") cfg.arch = train::ArchConfig::toy(in_c);
        else throw ConfigError("arch preset must be desk, paper or toy");
    } else {
        const json& a = j["arch"];
        for (const auto& [key, value] : a.items())
            if (key != "n_stages" && key != "growth" && key != "stem_channels" &&
                key != "compression")
                throw ConfigError("unknown arch key \"" + key + "\"");
        cfg.arch = train::ArchConfig::desk(in_c);
        if (a.contains("n_stages")) cfg.arch.n_stages = a["n_stages"];
        if (a.contains("growth")) cfg.arch.growth = a["growth"];
        if (a.contains("stem_channels")) cfg.arch.stem_channels = a["stem_channels"];
        if (a.contains("compression")) cfg.arch.compression = a["compression"];
    }
    if (j.contains("learning_rate")) cfg.opt.learning_rate = j["learning_rate"];
    if (j.contains("momentum")) cfg.opt.momentum = j["momentum"];
    if (j.contains("decay")) cfg.opt.decay = j["decay"];
    if (j.contains("decay_mode")) {
        const std::string mode = j["decay_mode"];
        if (mode == "lr") cfg.opt.decay_mode = train::OptimizerConfig::DecayMode::LearningRate;
        else if (mode == "weight") cfg.opt.decay_mode = train::OptimizerConfig::DecayMode::Weight;
        else throw ConfigError("decay_mode must be \"lr\" or \"weight\"");
    }
    if (j.contains("zone_weights")) {
        const auto zw = j["zone_weights"].get<std::vector<double>>();
        if (zw.size() != 3) throw ConfigError("zone_weights must have 3 entries (pg, cz, pz)");
        for (int i = 0; i < 3; ++i) cfg.opt.zone_weights[i] = zw[i];
    }
    if (j.contains("batch_size")) cfg.opt.batch_size = j["batch_size"];
    if (j.contains("epochs")) cfg.opt.epochs = j["epochs"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    return cfg;
}

// ---- dataset helpers --------------------------------------------------------

std::vector<CaseRecord> load_cases(const fs::path& data_dir,
                                   const std::string& split = "all") {
    const Manifest manifest = read_manifest(data_dir / "manifest.json");
    std::vector<CaseRecord> cases;
    for (const auto& entry : manifest.cases) {
        if (split == "train" && entry.split != SplitTag::Train) continue;
        if (split == "test" && entry.split != SplitTag::Test) continue;
        cases.push_back(load_case(entry, data_dir));
    }
    if (cases.empty())
        throw DataError("no cases with split \"" + split + "\" in " + data_dir.string());
    return cases;
}

void save_dataset(const std::vector<CaseRecord>& cases, const fs::path& dir,
                  const json& provenance) {
    fs::create_directories(dir);
    Manifest manifest;
    for (const CaseRecord& rec : cases) manifest.cases.push_back(save_case(rec, dir));
    write_manifest(manifest, dir / "manifest.json");
    if (!provenance.is_null()) {
        std::ofstream out(dir / "dataset.json");
        out << provenance.dump(2) << '\n';
    }
}

// ---- subcommands ------------------------------------------------------------

int cmd_phantom(const Common& c, const std::string& scale, int count) {
    phantom::PhantomConfig cfg = parse_phantom_config(c.config, scale);
    cfg.validate(); // before the parallel region: workers must not throw
    const std::uint64_t seed = c.seed_set ? c.seed : cfg.seed;
    Rng rng(seed);
    std::vector<CaseRecord> cases(count);
    parallel_for(static_cast<std::size_t>(count), c.workers(), [&](std::size_t i) {
        CaseRecord rec = phantom::generate_case(cfg, rng.split(i));
        char id[32];
        std::snprintf(id, sizeof id, "case_%03zu", i);
        rec.case_id = id;
        cases[i] = std::move(rec);
    });
    if (c.verbose)
        std::cout << "phantom grid " << cfg.dims[0] << "x" << cfg.dims[1] << "x" << cfg.dims[2]
                  << " @ " << cfg.spacing_mm[0] << " mm, seed " << seed << ", "
                  << c.workers() << " workers\n";
    save_dataset(cases, c.out, {{"generator", "phantom"}, {"seed", seed}, {"count", count}});
    std::cout << "wrote " << count << " cases to " << c.out << "\n";
    return 0;
}

int cmd_split(const Common& c, double train_frac) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("--train-frac must lie in (0,1)");
    const fs::path dir = c.data;
    Manifest manifest = read_manifest(dir / "manifest.json");
    std::vector<std::size_t> order(manifest.cases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(c.seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(train_frac * manifest.cases.size()));
    for (std::size_t i = 0; i < order.size(); ++i)
        manifest.cases[order[i]].split = i < n_train ? SplitTag::Train : SplitTag::Test;
    write_manifest(manifest, dir / "manifest.json");
    std::cout << "split " << n_train << " train / " << (order.size() - n_train) << " test\n";
    return 0;
}

int cmd_prep(const Common& c) {
    const PrepFileConfig cfg = parse_prep_config(c.config);
    cfg.prep.validate();
    std::vector<CaseRecord> cases = load_cases(c.data);
    std::vector<CaseRecord> out(cases.size());
    parallel_for(cases.size(), c.workers(), [&](std::size_t i) {
        out[i] = prep::prep_case(cases[i], cfg.prep);
    });
    save_dataset(out, c.out,
                 {{"generator", "prep"},
                  {"target_spacing_mm", cfg.prep.target_spacing_mm},
                  {"crop_size", cfg.prep.crop_size}});
    std::cout << "preprocessed " << out.size() << " cases\n";
    return 0;
}

int cmd_augment(const Common& c) {
    const PrepFileConfig cfg = parse_prep_config(c.config);
    const std::uint64_t seed = c.seed_set ? c.seed : cfg.seed;
    std::vector<CaseRecord> cases = load_cases(c.data);
    std::vector<CaseRecord> out;
    std::size_t augmented = 0;
    Rng rng(seed);
    std::size_t case_index = 0;
    for (CaseRecord& rec : cases) {
        // train cases get deformed copies; test cases pass through untouched
        if (rec.split == SplitTag::Train && cfg.elastic.n_augment > 0) {
            Rng stream = rng.split(case_index);
            auto augs = prep::augment_case(rec, cfg.elastic, stream);
            augmented += augs.size();
            out.push_back(std::move(rec));
            for (auto& a : augs) out.push_back(std::move(a));
        } else {
            out.push_back(std::move(rec));
        }
        ++case_index;
    }
    save_dataset(out, c.out,
                 {{"generator", "augment"},
                  {"seed", seed},
                  {"alpha", cfg.elastic.alpha},
                  {"sigma", cfg.elastic.sigma},
                  {"n_augment", cfg.elastic.n_augment}});
    std::cout << "wrote " << out.size() << " cases (" << augmented << " augmented)\n";
    return 0;
}

int cmd_train(const Common& c) {
    const TrainFileConfig cfg = parse_train_config(c.config);
    const std::uint64_t seed = c.seed_set ? c.seed : cfg.seed;
    const std::vector<CaseRecord> cases = load_cases(c.data, "train");
    Rng rng(seed);
    if (c.verbose)
        std::cout << "training " << (cfg.regime.kind == train::Regime::Kind::UM
                                         ? std::string("um")
                                         : "im(" + cfg.regime.combo->name() + ")")
                  << " on " << cases.size() << " cases, " << cfg.opt.epochs << " epochs, seed "
                  << seed << ", " << c.workers() << " workers\n";
    const train::FitResult result =
        train::fit(cfg.regime, cases, cfg.arch, cfg.opt, rng, c.workers());

    fs::create_directories(c.out);
    train::CheckpointMeta meta;
    meta.step = result.steps;
    meta.rng_seed = seed;
    meta.rng_counter = rng.counter();
    for (int i = 0; i < 4; ++i) meta.rng_state[i] = rng.state()[i];
    meta.regime = result.regime;
    meta.norm = result.norm;
    train::save_checkpoint(result.params, meta, fs::path(c.out) / "final.ckpt");
    train::save_checkpoint(result.best_params, meta, fs::path(c.out) / "best.ckpt");
    train::write_trainlog(result.log, fs::path(c.out) / "trainlog.csv", c.deterministic);
    if (!result.log.rows.empty())
        std::cout << "trained " << cfg.opt.epochs << " epochs, final loss "
                  << result.log.rows.back().mean_loss << ", best epoch " << result.best_epoch
                  << "\n";
    return 0;
}

struct PredictSetup {
    train::Checkpoint ckpt;
    InputCombo combo = InputCombo::parse({"mag"});
    bool unified = false;
};

PredictSetup load_model(const std::string& model_path, const std::string& combo_name) {
    PredictSetup s{train::load_checkpoint(model_path)};
    s.unified = s.ckpt.meta.regime.kind == train::Regime::Kind::UM;
    if (s.unified) {
        if (combo_name.empty())
            throw ConfigError("the unified model needs --combo to pick the input subset");
        s.combo = combo_from_name(combo_name);
    } else {
        s.combo = *s.ckpt.meta.regime.combo;
        if (!combo_name.empty() && combo_from_name(combo_name) != s.combo)
            throw ConfigError("--combo does not match the IM checkpoint (trained on " +
                              s.combo.name() + ")");
    }
    return s;
}

int cmd_predict(const Common& c, const std::string& model, const std::string& split,
                const std::string& combo_name) {
    const PredictSetup s = load_model(model, combo_name);
    const std::vector<CaseRecord> cases = load_cases(c.data, split);
    fs::create_directories(c.out);
    json index = json::array();
    for (const CaseRecord& rec : cases) {
        const MaskSet pred = train::predict(s.ckpt.params, s.ckpt.meta.norm, rec, s.combo,
                                            s.unified, c.workers());
        const std::string rel = rec.case_id + "_pred.mmask";
        write_mask(pred, fs::path(c.out) / rel);
        index.push_back({{"case_id", rec.case_id}, {"mask", rel}});
    }
    std::ofstream out(fs::path(c.out) / "predictions.json");
    out << json{{"model", model}, {"combo", s.combo.name()}, {"cases", index}}.dump(2) << '\n';
    std::cout << "predicted " << cases.size() << " cases\n";
    return 0;
}

int cmd_eval(const Common& c, const std::string& model, const std::string& split,
             const std::string& combo_name, bool hd3d) {
    const PredictSetup s = load_model(model, combo_name);
    const std::vector<CaseRecord> cases = load_cases(c.data, split);
    const evalkit::HdMode mode = hd3d ? evalkit::HdMode::Volume3D : evalkit::HdMode::Slice2D;
    std::vector<evalkit::MetricsRow> rows;
    for (const CaseRecord& rec : cases) {
        const MaskSet pred = train::predict(s.ckpt.params, s.ckpt.meta.norm, rec, s.combo,
                                            s.unified, c.workers());
        for (auto& row : evalkit::evaluate_case(rec.case_id, pred, rec.truth, mode))
            rows.push_back(std::move(row));
    }
    fs::create_directories(c.out);
    const std::string model_name =
        (s.unified ? std::string("um[") + s.combo.name() + "]" : "im_" + s.combo.name());
    evalkit::write_metrics_csv(rows, fs::path(c.out) / "metrics.csv");
    const auto agg = evalkit::aggregate(rows);
    evalkit::write_summary_csv(model_name, agg, fs::path(c.out) / "summary.csv");
    evalkit::write_summary_markdown(model_name, agg, fs::path(c.out) / "summary.md");
    std::cout << "evaluated " << cases.size() << " cases (" << model_name << ")\n";
    return 0;
}

int cmd_tabulate(const Common& c, const std::string& model, const std::string& split,
                 const std::string& combo_name, bool paired) {
    const PredictSetup s = load_model(model, combo_name);
    const std::vector<CaseRecord> cases = load_cases(c.data, split);
    std::vector<MaskSet> preds;
    preds.reserve(cases.size());
    for (const CaseRecord& rec : cases)
        preds.push_back(train::predict(s.ckpt.params, s.ckpt.meta.norm, rec, s.combo,
                                       s.unified, c.workers()));
    const auto rows = evalkit::build_tabulation(cases, preds, paired);
    fs::create_directories(c.out);
    evalkit::write_tabulation_csv(rows, fs::path(c.out) / "tabulation.csv");
    evalkit::write_tabulation_markdown(rows, fs::path(c.out) / "tabulation.md");
    std::cout << "tabulated " << cases.size() << " cases\n";
    return 0;
}

int cmd_overlay(const Common& c, const std::string& case_id, const std::string& map_name,
                const std::string& mask_path) {
    const std::vector<CaseRecord> cases = load_cases(c.data);
    const CaseRecord* rec = nullptr;
    for (const auto& r : cases)
        if (r.case_id == case_id) rec = &r;
    if (!rec) throw DataError("case \"" + case_id + "\" not found in " + c.data);
    const MapKind kind = map_kind_from_string(map_name);
    const VolumeGrid& vol = rec->map(kind);
    const MaskSet masks = mask_path.empty() ? rec->truth : read_mask(mask_path);
    if (masks.dims != vol.dims) throw ShapeError("overlay: mask and map dims differ");

    double lo = vol.values[0], hi = vol.values[0];
    for (double v : vol.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi > lo ? hi - lo : 1.0;

    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
    fs::create_directories(c.out);
    for (int z = 0; z < nz; ++z) {
        std::vector<std::uint8_t> rgb(static_cast<std::size_t>(nx) * ny * 3);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double v = (vol.at(x, y, z) - lo) / range;
                const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
                const std::size_t o = 3 * (static_cast<std::size_t>(y) * nx + x);
                rgb[o] = rgb[o + 1] = rgb[o + 2] = g;
            }
        // zone contours: boundary = zone voxel with an in-plane background neighbor
        auto draw = [&](const std::vector<std::uint8_t>& zone, std::uint8_t r, std::uint8_t gg,
                        std::uint8_t b) {
            auto at = [&](int x, int y) -> std::uint8_t {
                if (x < 0 || y < 0 || x >= nx || y >= ny) return 0;
                return zone[(static_cast<std::size_t>(z) * ny + y) * nx + x];
            };
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    if (!at(x, y)) continue;
                    if (at(x - 1, y) && at(x + 1, y) && at(x, y - 1) && at(x, y + 1)) continue;
                    const std::size_t o = 3 * (static_cast<std::size_t>(y) * nx + x);
                    rgb[o] = r;
                    rgb[o + 1] = gg;
                    rgb[o + 2] = b;
                }
        };
        draw(masks.pg, 230, 60, 60);
        draw(masks.cz, 70, 200, 90);
        draw(masks.pz, 80, 130, 240);
        char name[64];
        std::snprintf(name, sizeof name, "%s_%s_z%02d.png", case_id.c_str(),
                      map_name.c_str(), z);
        write_png_rgb8(fs::path(c.out) / name, nx, ny, rgb);
    }
    std::cout << "wrote " << nz << " overlay slices\n";
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"zoneforge: synthetic prostate MRE segmentation pipeline"};
    app.require_subcommand(1);

    Common c_phantom, c_split, c_prep, c_augment, c_train, c_predict, c_eval, c_tab, c_overlay;
    std::string scale = "desk";
    int count = 1;
    double train_frac = 0.75;
    std::string model, split_predict = "test", split_eval = "test", split_tab = "test";
    std::string combo_predict, combo_eval, combo_tab;
    bool hd3d = false, paired = false;
    std::string case_id, map_name = "mag", mask_path;

    CLI::App* phantom_cmd = app.add_subcommand("phantom", "generate synthetic cases");
    add_common(phantom_cmd, c_phantom, false, true);
    phantom_cmd->add_option("--config", c_phantom.config, "phantom.json");
    phantom_cmd->add_option("--count", count, "number of cases")->check(CLI::PositiveNumber);
    phantom_cmd->add_option("--scale", scale, "desk | paper")
        ->check(CLI::IsMember({"desk", "paper"}));

    CLI::App* split_cmd = app.add_subcommand("split", "assign train/test tags in a manifest");
    add_common(split_cmd, c_split, true, false);
    split_cmd->add_option("--train-frac", train_frac, "training fraction (default 0.75)");

    CLI::App* prep_cmd = app.add_subcommand("prep", "resample and crop a dataset");
    add_common(prep_cmd, c_prep, true, true);
    prep_cmd->add_option("--config", c_prep.config, "prep.json");

    CLI::App* augment_cmd = app.add_subcommand("augment", "elastic-deform training cases");
    add_common(augment_cmd, c_augment, true, true);
    augment_cmd->add_option("--config", c_augment.config, "prep.json");

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, c_train, true, true);
    train_cmd->add_option("--config", c_train.config, "train.json")->required();

    CLI::App* predict_cmd = app.add_subcommand("predict", "write predicted masks");
    add_common(predict_cmd, c_predict, true, true);
    predict_cmd->add_option("--model", model, "checkpoint path")->required();
    predict_cmd->add_option("--split", split_predict, "train | test | all");
    predict_cmd->add_option("--combo", combo_predict, "input combination (UM)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "metrics against ground truth");
    add_common(eval_cmd, c_eval, true, true);
    eval_cmd->add_option("--model", model, "checkpoint path")->required();
    eval_cmd->add_option("--split", split_eval, "train | test | all");
    eval_cmd->add_option("--combo", combo_eval, "input combination (UM)");
    eval_cmd->add_flag("--hd3d", hd3d, "3D Hausdorff instead of per-slice 2D");

    CLI::App* tab_cmd = app.add_subcommand("tabulate", "zonal SWS/mag/phi statistics");
    add_common(tab_cmd, c_tab, true, true);
    tab_cmd->add_option("--model", model, "checkpoint path")->required();
    tab_cmd->add_option("--split", split_tab, "train | test | all");
    tab_cmd->add_option("--combo", combo_tab, "input combination (UM)");
    tab_cmd->add_flag("--paired", paired, "paired t-test instead of Welch");

    CLI::App* overlay_cmd = app.add_subcommand("overlay", "render mask contours as PNGs");
    add_common(overlay_cmd, c_overlay, true, true);
    overlay_cmd->add_option("--case", case_id, "case id")->required();
    overlay_cmd->add_option("--map", map_name, "map kind (default mag)");
    overlay_cmd->add_option("--mask", mask_path, "mask file (default: ground truth)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        int rc = 1;
        const Common* used = nullptr;
        std::string sub;
        if (phantom_cmd->parsed()) {
            rc = cmd_phantom(c_phantom, scale, count);
            used = &c_phantom;
            sub = "phantom";
        } else if (split_cmd->parsed()) {
            rc = cmd_split(c_split, train_frac);
            used = &c_split;
            sub = "split";
        } else if (prep_cmd->parsed()) {
            rc = cmd_prep(c_prep);
            used = &c_prep;
            sub = "prep";
        } else if (augment_cmd->parsed()) {
            rc = cmd_augment(c_augment);
            used = &c_augment;
            sub = "augment";
        } else if (train_cmd->parsed()) {
            rc = cmd_train(c_train);
            used = &c_train;
            sub = "train";
        } else if (predict_cmd->parsed()) {
            rc = cmd_predict(c_predict, model, split_predict, combo_predict);
            used = &c_predict;
            sub = "predict";
        } else if (eval_cmd->parsed()) {
            rc = cmd_eval(c_eval, model, split_eval, combo_eval, hd3d);
            used = &c_eval;
            sub = "eval";
        } else if (tab_cmd->parsed()) {
            rc = cmd_tabulate(c_tab, model, split_tab, combo_tab, paired);
            used = &c_tab;
            sub = "tabulate";
        } else if (overlay_cmd->parsed()) {
            rc = cmd_overlay(c_overlay, case_id, map_name, mask_path);
            used = &c_overlay;
            sub = "overlay";
        }
        if (used) {
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_run_record(*used, sub, args, wall);
        }
        return rc;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace zoneforge::cli
