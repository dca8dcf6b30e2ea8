// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Run all with no arguments, or a subset via --criterion N (repeatable).

#include <atomic>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "zoneforge/eval/report.hpp"
#include "zoneforge/phantom/phantom.hpp"
#include "zoneforge/prep/prep.hpp"
#include "zoneforge/train/trainer.hpp"
#include "zoneforge/util/parallel.hpp"

using namespace zoneforge;
namespace fs = std::filesystem;

namespace {

int g_threads = default_threads();

struct Outcome {
    bool pass = false;
    std::string details;
};

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<CaseRecord> make_phantoms(int count, std::uint64_t seed,
                                      const phantom::PhantomConfig& cfg) {
    std::vector<CaseRecord> cases(count);
    Rng rng(seed);
    parallel_for(static_cast<std::size_t>(count), g_threads, [&](std::size_t i) {
        CaseRecord rec = phantom::generate_case(cfg, rng.split(i));
        rec.case_id = "case_" + std::to_string(i);
        cases[i] = std::move(rec);
    });
    return cases;
}

double mean_zone_dice(const train::NetworkParams<float>& params, const train::NormStats& norm,
                      std::span<const CaseRecord> cases, const InputCombo& combo, bool unified,
                      int zone) {
    double acc = 0.0;
    for (const CaseRecord& rec : cases) {
        const MaskSet pred = train::predict(params, norm, rec, combo, unified, g_threads);
        acc += evalkit::dice(pred.zone(zone), rec.truth.zone(zone));
    }
    return acc / static_cast<double>(cases.size());
}

// ---- 1: metric oracle equivalence -------------------------------------------

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double max_hd_err = 0.0;
    int hd_checked = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const int nx = 4 + static_cast<int>(rng.below(13)); // up to 16
        const int ny = 4 + static_cast<int>(rng.below(13));
        const Dims dims{nx, ny, 1};
        const std::size_t n = static_cast<std::size_t>(nx) * ny;
        auto a = testutil::random_mask(n, rng.uniform(0.05, 0.8), rng);
        auto b = testutil::random_mask(n, rng.uniform(0.05, 0.8), rng);
        if (evalkit::dice(a, b) != testutil::dice_oracle(a, b))
            return {false, "dice mismatch at rep " + std::to_string(rep)};
        const Spacing sp{rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), 1.0};
        const bool a_empty = std::none_of(a.begin(), a.end(), [](auto v) { return v != 0; });
        const bool b_empty = std::none_of(b.begin(), b.end(), [](auto v) { return v != 0; });
        if (!a_empty && !b_empty) {
            const double mine = evalkit::hausdorff_mm(a, b, dims, sp);
            const double oracle = testutil::hd_oracle_2d(a, b, dims, sp);
            max_hd_err = std::max(max_hd_err, std::abs(mine - oracle));
            ++hd_checked;
            if (std::abs(mine - oracle) > 1e-12)
                return {false, "hausdorff error " + std::to_string(mine - oracle)};
        }
    }
    const double dt = elapsed_since(t0);
    std::ostringstream os;
    os << "500 pairs, " << hd_checked << " HD comparisons, max |err| = " << max_hd_err
       << ", " << dt << " s";
    return {dt < 10.0, os.str()};
}

// ---- 2: gradient correctness -------------------------------------------------

Outcome criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    // Micro-width network (every structural element present: stem, two dense
    // encoder stages, transitions, bottleneck, skip concats, decoder, head) so
    // the exhaustive h=1e-5 sweep finishes well inside the budget and no ReLU
    // pre-activation sits within a finite-difference step of its kink for the
    // pinned seeds.
    unet::ArchConfig arch;
    arch.in_channels = 1;
    arch.n_stages = 2;
    arch.growth = 2;
    arch.stem_channels = 4;
    const auto net = unet::init_params_t<double>(arch, Rng(1));
    Rng rng(1001);
    unet::Tensor4<double> x(1, 1, 16, 16);
    for (double& v : x.v) v = rng.uniform(-1.5, 1.5);
    unet::Tensor4<double> target(1, 3, 16, 16);
    for (double& v : target.v) v = static_cast<double>(rng.below(2));

    const unet::DenseUnet<double> engine(arch);
    unet::Cache<double> cache;
    const unet::Tensor4<double> pred = engine.forward(net.flat, x, cache);
    const train::CeLoss<double> ce = train::ce_loss(pred, target);
    std::vector<double> analytic(net.flat.size());
    engine.backward(net.flat, cache, ce.grad, analytic);

    const std::size_t n = net.flat.size();
    std::vector<double> errs(n);
    const double h = 1e-5;
    parallel_for_workers(n, g_threads, [&](std::size_t i, std::size_t) {
        std::vector<double> params = net.flat;
        unet::Cache<double> c;
        auto value = [&](double delta) {
            params[i] = net.flat[i] + delta;
            const auto y = engine.forward(params, x, c);
            return train::ce_loss_value(y, target);
        };
        const double up = value(h);
        const double down = value(-h);
        const double fd = (up - down) / (2.0 * h);
        errs[i] = testutil::rel_err(analytic[i], fd);
    });
    std::sort(errs.begin(), errs.end());
    const double p95 = errs[static_cast<std::size_t>(0.95 * (n - 1))];
    const double mx = errs.back();
    const double frac_ok =
        static_cast<double>(std::lower_bound(errs.begin(), errs.end(), 1e-3) - errs.begin()) /
        static_cast<double>(n);
    const double dt = elapsed_since(t0);
    std::ostringstream os;
    os << n << " parameters, rel err p95 = " << p95 << ", max = " << mx << ", " << frac_ok * 100
       << "% below 1e-3, " << dt << " s";
    return {frac_ok >= 0.95 && mx <= 1e-2 && dt < 120.0, os.str()};
}

// ---- 3: CE loss spot values ---------------------------------------------------

Outcome criterion3() {
    unet::Tensor4<double> pred(1, 3, 16, 16), target(1, 3, 16, 16);
    std::fill(pred.v.begin(), pred.v.end(), 0.5);
    Rng rng(303);
    for (double& t : target.v) t = static_cast<double>(rng.below(2));
    const double half = train::ce_loss_value(pred, target);
    const double err_half = std::abs(half - std::log(2.0));

    for (std::size_t i = 0; i < pred.v.size(); ++i) pred.v[i] = target.v[i];
    const double ident = train::ce_loss_value(pred, target);

    std::ostringstream os;
    os << "|loss(0.5) - ln 2| = " << err_half << ", loss(pred = target) = " << ident;
    return {err_half <= 1e-9 && ident <= 2e-7, os.str()};
}

// ---- 4: overfit reproduction (IM, mag) ----------------------------------------

Outcome criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cases = make_phantoms(3, 404, phantom::PhantomConfig{});
    const train::Regime regime = train::Regime::im(InputCombo::parse({"mag"}));
    const unet::ArchConfig arch = unet::ArchConfig::desk(1);
    const train::NormStats norm = train::compute_norm_stats(cases, regime.combo->kinds());
    train::OptimizerConfig opt; // lr 1e-3, momentum 0.9, decay 1e-6
    opt.epochs = 300;
    // 27 training slices: batch 25 would give two updates per epoch (25 + 2);
    // a 9-slice batch keeps full batches and three updates at identical cost
    opt.batch_size = 9;

    double d_pg = 0.0, d_cz = 0.0, d_pz = 0.0;
    int reached_at = -1;
    train::fit(regime, cases, arch, opt, Rng(405), g_threads,
               [&](int epoch, double, const train::NetworkParams<float>& p) {
                   // cheap cadence early, fine cadence near the expected crossing
                   const int stride = epoch < 100 ? 20 : 10;
                   if (epoch % stride != 0 && epoch != 300) return true;
                   d_pg = mean_zone_dice(p, norm, cases, *regime.combo, false, 0);
                   d_cz = mean_zone_dice(p, norm, cases, *regime.combo, false, 1);
                   d_pz = mean_zone_dice(p, norm, cases, *regime.combo, false, 2);
                   if (d_pg >= 0.95 && d_cz >= 0.90 && d_pz >= 0.80) {
                       reached_at = epoch;
                       return false;
                   }
                   return true;
               });
    const double dt = elapsed_since(t0);
    std::ostringstream os;
    os << "training-set dice PG " << d_pg << " CZ " << d_cz << " PZ " << d_pz;
    if (reached_at > 0) os << " (targets reached at epoch " << reached_at << ")";
    os << ", " << dt << " s";
    return {d_pg >= 0.95 && d_cz >= 0.90 && d_pz >= 0.80 && dt < 900.0, os.str()};
}

// ---- 5: generalization trend ---------------------------------------------------

Outcome criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    const phantom::PhantomConfig pcfg;
    auto train_cases = make_phantoms(20, 505, pcfg);
    auto test_cases = make_phantoms(5, 506, pcfg);

    // 9x elastic augmentation of the training set
    prep::ElasticParams elastic;
    Rng aug_rng(507);
    std::vector<CaseRecord> augmented = train_cases;
    for (const CaseRecord& rec : train_cases) {
        Rng stream = aug_rng.split(std::hash<std::string>{}(rec.case_id));
        for (auto& a : prep::augment_case(rec, elastic, stream)) augmented.push_back(std::move(a));
    }

    const unet::ArchConfig arch = unet::ArchConfig::toy(1);
    train::OptimizerConfig opt;
    opt.epochs = 4;

    // model A: IM(mag)
    const train::Regime mag = train::Regime::im(InputCombo::parse({"mag"}));
    const train::FitResult fit_mag =
        train::fit(mag, augmented, arch, opt, Rng(508), g_threads);
    const double dice_mag =
        mean_zone_dice(fit_mag.params, fit_mag.norm, test_cases, *mag.combo, false, 0);

    // model B: IM(sws) on noise-degraded SWS (train and test alike)
    auto degrade = [](std::vector<CaseRecord> cases, std::uint64_t seed) {
        Rng rng(seed);
        for (CaseRecord& rec : cases) {
            VolumeGrid& sws = rec.maps.at(MapKind::SWS);
            for (double& v : sws.values) v = std::max(0.0, v + rng.normal(0.0, 1.0));
        }
        return cases;
    };
    const auto degraded_train = degrade(augmented, 509);
    const auto degraded_test = degrade(test_cases, 510);
    const train::Regime sws = train::Regime::im(InputCombo::parse({"sws"}));
    const train::FitResult fit_sws =
        train::fit(sws, degraded_train, arch, opt, Rng(508), g_threads);
    const double dice_sws =
        mean_zone_dice(fit_sws.params, fit_sws.norm, degraded_test, *sws.combo, false, 0);

    const double dt = elapsed_since(t0);
    std::ostringstream os;
    os << "held-out PG dice: IM(mag) = " << dice_mag << ", IM(degraded sws) = " << dice_sws
       << ", " << dt << " s";
    return {dice_mag >= 0.85 && dice_sws < dice_mag && dt < 7200.0, os.str()};
}

// ---- 6: dataset arithmetic -----------------------------------------------------

Outcome criterion6() {
    phantom::PhantomConfig cfg;
    cfg.dims = {16, 16, 25};
    cfg.spacing_mm = {1.0, 1.0, 1.0};
    cfg.pg_semiaxes_mm = {5.0, 4.0, 9.0};
    cfg.center_jitter_mm = {0.5, 0.5, 0.5};
    const auto cases = make_phantoms(30, 606, cfg);
    const auto im = train::assemble_im(cases, InputCombo::parse({"mag"}));
    const auto um = train::assemble_um(cases);
    std::ostringstream os;
    os << "IM samples = " << im.size() << " (want 750), UM samples = " << um.size()
       << " (want 10500)";
    return {im.size() == 750 && um.size() == 10500, os.str()};
}

// ---- 7: UM single-model contract ----------------------------------------------

Outcome criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cases = make_phantoms(2, 707, phantom::PhantomConfig{});
    const auto target = make_phantoms(1, 708, phantom::PhantomConfig{});
    const unet::ArchConfig arch = unet::ArchConfig::toy(kMapKindCount);
    train::OptimizerConfig opt;
    opt.epochs = 2;
    const train::FitResult um =
        train::fit(train::Regime::um(), cases, arch, opt, Rng(709), g_threads);

    int ok = 0;
    for (const InputCombo& combo : InputCombo::canonical_list()) {
        const MaskSet pred =
            train::predict(um.params, um.norm, target[0], combo, true, g_threads);
        pred.validate(); // throws on any invariant violation
        ++ok;
    }
    const double dt = elapsed_since(t0);
    std::ostringstream os;
    os << ok << "/14 combinations inferred by one checkpoint with valid masks, " << dt << " s";
    return {ok == 14, os.str()};
}

// ---- 8: tabulation identity ----------------------------------------------------

Outcome criterion8() {
    const auto cases = make_phantoms(4, 808, phantom::PhantomConfig{});
    std::vector<MaskSet> preds;
    for (const auto& rec : cases) preds.push_back(rec.truth);

    // per-case stats are bit-identical between mask and predicted columns
    for (const auto& rec : cases) {
        const auto a = evalkit::tabulate(rec, rec.truth);
        const auto b = evalkit::tabulate(rec, preds[&rec - cases.data()]);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::memcmp(&a[i].mean, &b[i].mean, sizeof(double)) != 0 ||
                std::memcmp(&a[i].sd, &b[i].sd, sizeof(double)) != 0 || a[i].n != b[i].n)
                return {false, "ZoneStats differ for identical masks"};
        }
    }
    const auto rows = evalkit::build_tabulation(cases, preds);
    for (const auto& row : rows)
        for (int zi = 0; zi < 3; ++zi) {
            if (std::memcmp(&row.mask_cols[zi].mean, &row.pred_cols[zi].mean,
                            sizeof(double)) != 0 ||
                std::memcmp(&row.mask_cols[zi].sd, &row.pred_cols[zi].sd, sizeof(double)) != 0)
                return {false, "cohort cells differ for identical masks"};
            if (!row.p[zi] || *row.p[zi] != 1.0)
                return {false, "Welch p != 1.0 for identical samples"};
        }
    return {true, "9 map/zone cells bit-identical, all Welch p = 1.0"};
}

// ---- 9: ADC round-trip ---------------------------------------------------------

Outcome criterion9() {
    phantom::DwiProtocol proto; // b = {0, 50, 500, 1000, 1400}
    const Dims dims{64, 64, 9};
    const Spacing sp{1, 1, 1};
    double worst_rel = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(900 + seed);
        std::vector<double> vals(static_cast<std::size_t>(64) * 64 * 9);
        for (double& v : vals) v = rng.uniform01() < 0.05 ? 0.0 : rng.uniform(1e-5, 3.2e-3);
        const VolumeGrid adc(MapKind::ADC, dims, sp, vals);
        const VolumeGrid s0 = phantom::DwiProtocol::uniform_s0(dims, sp, 1000.0);
        const auto fit = phantom::adc_fit(phantom::synth_dwi(adc, s0, proto), proto);
        if (fit.flagged != 0) return {false, "flagged voxels in a noiseless fit"};
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double truth = adc.values[i];
            const double err = std::abs(fit.adc.values[i] - truth);
            if (truth > 0.0)
                worst_rel = std::max(worst_rel, err / truth);
            else if (err > 1e-15)
                return {false, "zero-ADC voxel not recovered exactly"};
        }
    }
    std::ostringstream os;
    os << "3 random fields, worst relative error = " << worst_rel;
    return {worst_rel <= 1e-9, os.str()};
}

// ---- 10: augmentation invariants ----------------------------------------------

Outcome criterion10() {
    const auto cases = make_phantoms(1, 1010, phantom::PhantomConfig{});
    const CaseRecord& rec = cases[0];
    prep::ElasticParams p; // alpha 21, sigma 512
    Rng rng(1011);
    const int w = rec.truth.dims[0], h = rec.truth.dims[1];
    double max_disp = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto field = prep::sample_displacement(w, h, p, rng);
        max_disp = std::max(max_disp, field.max_abs());
        if (field.max_abs() > 21.0)
            return {false, "displacement " + std::to_string(field.max_abs()) + " px > alpha"};
        MaskSet warped = rec.truth;
        prep::warp_mask_slice(warped, rep % rec.truth.dims[2], field);
        try {
            warped.validate(); // binary + containment + disjointness, exactly
        } catch (const Error& e) {
            return {false, std::string("warped mask invariant: ") + e.what()};
        }
    }
    // alpha = 0 must be the identity (up to the id suffix)
    prep::ElasticParams zero = p;
    zero.alpha = 0.0;
    zero.n_augment = 2;
    Rng rng2(1012);
    for (const CaseRecord& a : prep::augment_case(rec, zero, rng2)) {
        if (!(a.truth == rec.truth)) return {false, "alpha=0 changed the masks"};
        for (const auto& [kind, vol] : a.maps)
            if (!(vol == rec.map(kind))) return {false, "alpha=0 changed a map"};
    }
    std::ostringstream os;
    os << "100 fields, max displacement = " << max_disp << " px (bound 21)";
    return {true, os.str()};
}

// ---- 11: pipeline determinism ---------------------------------------------------

Outcome criterion11() {
    const char* cli_env = std::getenv("ZONEFORGE_CLI");
    if (!cli_env) return {false, "ZONEFORGE_CLI not set (path to the zoneforge binary)"};
    const std::string cli = cli_env;
    const fs::path root = fs::temp_directory_path() / "zoneforge_acceptance_c11";
    fs::remove_all(root);
    fs::create_directories(root);

    std::ofstream(root / "prep.json")
        << R"({"target_spacing_mm":1.0,"crop_size":64,"alpha":21,"sigma":512,"n_augment":2})";
    std::ofstream(root / "train.json")
        << R"({"regime":"im","combo":"mag","arch":"desk","epochs":5,"batch_size":25})";

    auto run_pipeline = [&](const fs::path& dir) {
        fs::create_directories(dir);
        auto run = [&](const std::string& args) {
            const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
            return std::system(cmd.c_str()) == 0;
        };
        const std::string data = (dir / "data").string();
        return run("phantom --out " + data + " --seed 42 --count 6 --deterministic") &&
               run("split --data " + data + " --seed 42") &&
               run("prep --config " + (root / "prep.json").string() + " --data " + data +
                   " --out " + (dir / "prepped").string() + " --deterministic") &&
               run("augment --config " + (root / "prep.json").string() + " --data " +
                   (dir / "prepped").string() + " --out " + (dir / "aug").string() +
                   " --seed 42 --deterministic") &&
               run("train --config " + (root / "train.json").string() + " --data " +
                   (dir / "aug").string() + " --out " + (dir / "run").string() +
                   " --seed 42 --deterministic") &&
               run("eval --model " + (dir / "run" / "final.ckpt").string() + " --data " +
                   (dir / "prepped").string() + " --split test --out " +
                   (dir / "eval").string() + " --deterministic");
    };
    if (!run_pipeline(root / "a")) return {false, "first pipeline run failed"};
    if (!run_pipeline(root / "b")) return {false, "second pipeline run failed"};

    auto bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), {});
    };
    const char* artifacts[] = {"data/case_003_mag.mvol", "data/case_003.mmask",
                               "aug/case_001_aug2_sws.mvol", "run/final.ckpt",
                               "run/best.ckpt",            "run/trainlog.csv",
                               "eval/metrics.csv",         "eval/summary.csv"};
    for (const char* rel : artifacts) {
        const std::string a = bytes(root / "a" / rel);
        const std::string b = bytes(root / "b" / rel);
        if (a.empty()) return {false, std::string(rel) + " missing or empty"};
        if (a != b) return {false, std::string(rel) + " differs between runs"};
    }
    return {true, "8 artifacts byte-identical across two seeded runs (checkpoints, CSVs, volumes)"};
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "metric-oracle-equivalence", criterion1},
    {2, "gradient-correctness", criterion2},
    {3, "ce-loss-spot-values", criterion3},
    {4, "overfit-reproduction-im-mag", criterion4},
    {5, "generalization-trend", criterion5},
    {6, "dataset-arithmetic", criterion6},
    {7, "um-single-model-contract", criterion7},
    {8, "tabulation-identity", criterion8},
    {9, "adc-round-trip", criterion9},
    {10, "augmentation-invariants", criterion10},
    {11, "pipeline-determinism", criterion11},
};

} // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            selected.push_back(std::atoi(argv[++i]));
        } else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) {
            g_threads = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: zoneforge_acceptance [--criterion N]... [--threads N]\n";
            return 2;
        }
    }

    bool all_pass = true;
    for (const Criterion& c : kCriteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), c.id) == selected.end())
            continue;
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << "C" << c.id << " " << c.name
                  << " — " << out.details << std::endl;
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
