#include <doctest.h>

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "zoneforge/core/rng.hpp"
#include "zoneforge/eval/report.hpp"
#include "zoneforge/eval/stats.hpp"
#include "zoneforge/eval/tabulate.hpp"
#include "zoneforge/phantom/phantom.hpp"

using namespace zoneforge;
using namespace zoneforge::evalkit;


TEST_CASE("dice: examples, symmetry, oracle equality") {
    SUBCASE("identity, disjoint, half overlap") {
        std::vector<std::uint8_t> a{1, 1, 1, 1, 0, 0, 0, 0};
        std::vector<std::uint8_t> b{0, 0, 1, 1, 1, 1, 0, 0};
        CHECK(dice(a, a) == 1.0);
        std::vector<std::uint8_t> c{0, 0, 0, 0, 1, 1, 1, 1};
        CHECK(dice(a, c) == 0.0);
        CHECK(dice(a, b) == doctest::Approx(0.5)); // |A|=|B|=4, 2 shared
    }

    SUBCASE("empty conventions") {
        std::vector<std::uint8_t> e(8, 0), f{1, 0, 0, 0, 0, 0, 0, 0};
        CHECK(dice(e, e) == 1.0);
        CHECK(dice(e, f) == 0.0);
    }

    SUBCASE("random masks: symmetric, in range, equals brute force exactly") {
        Rng rng(5);
        for (int rep = 0; rep < 200; ++rep) {
            const auto a = testutil::random_mask(64, rng.uniform(0.1, 0.9), rng);
            const auto b = testutil::random_mask(64, rng.uniform(0.1, 0.9), rng);
            const double d = dice(a, b);
            CHECK(d == dice(b, a));
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
            CHECK(d == testutil::dice_oracle(a, b));
        }
    }

    SUBCASE("size mismatch raises ShapeError") {
        std::vector<std::uint8_t> a(4, 1), b(5, 1);
        CHECK_THROWS_AS(dice(a, b), ShapeError);
    }
}

TEST_CASE("hausdorff_mm: examples, scaling, oracle equality") {
    SUBCASE("identical masks give 0") {
        const Dims dims{8, 8, 1};
        Rng rng(9);
        auto a = testutil::random_mask(64, 0.4, rng);
        a[0] = 1; // non-empty
        CHECK(hausdorff_mm(a, a, dims, {1, 1, 1}) == 0.0);
    }

    SUBCASE("single-voxel masks at (0,0) and (3,4), 0.5 mm spacing -> 2.5 mm") {
        const Dims dims{8, 8, 1};
        std::vector<std::uint8_t> a(64, 0), b(64, 0);
        a[0] = 1;
        b[4 * 8 + 3] = 1;
        CHECK(hausdorff_mm(a, b, dims, {0.5, 0.5, 0.5}) == doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("empty mask raises EmptyMaskError") {
        const Dims dims{4, 4, 1};
        std::vector<std::uint8_t> a(16, 0), b(16, 1);
        CHECK_THROWS_AS(hausdorff_mm(a, b, dims, {1, 1, 1}), EmptyMaskError);
        CHECK_THROWS_AS(hausdorff_mm(b, a, dims, {1, 1, 1}), EmptyMaskError);
    }

    SUBCASE("spacing scales distances exactly") {
        const Dims dims{16, 16, 1};
        Rng rng(11);
        auto a = testutil::random_mask(256, 0.3, rng);
        auto b = testutil::random_mask(256, 0.3, rng);
        a[5] = b[200] = 1;
        const double d1 = hausdorff_mm(a, b, dims, {1, 1, 1});
        const double d3 = hausdorff_mm(a, b, dims, {3, 3, 3});
        CHECK(d3 == doctest::Approx(3.0 * d1).epsilon(1e-12));
    }

    SUBCASE("random 16x16 pairs match the exhaustive double loop to 1e-12") {
        Rng rng(13);
        for (int rep = 0; rep < 100; ++rep) {
            const Dims dims{16, 16, 2};
            auto a = testutil::random_mask(512, rng.uniform(0.05, 0.5), rng);
            auto b = testutil::random_mask(512, rng.uniform(0.05, 0.5), rng);
            a[0] = b[1] = 1; // same-slice anchors keep the 2D mode defined
            const Spacing sp{0.7, 1.3, 2.0};
            const double mine = hausdorff_mm(a, b, dims, sp);
            const double oracle = testutil::hd_oracle_2d(a, b, dims, sp);
            CHECK(mine == doctest::Approx(oracle).epsilon(1e-12));
            CHECK(hausdorff_mm(b, a, dims, sp) == doctest::Approx(mine).epsilon(1e-12));
        }
    }

    SUBCASE("3D mode measures across slices") {
        const Dims dims{4, 4, 3};
        std::vector<std::uint8_t> a(48, 0), b(48, 0);
        a[0] = 1;           // (0,0,0)
        b[2 * 16 + 0] = 1;  // (0,0,2)
        CHECK(hausdorff_mm(a, b, dims, {1, 1, 2}, HdMode::Volume3D) ==
              doctest::Approx(4.0).epsilon(1e-12));
        CHECK_THROWS_AS(hausdorff_mm(a, b, dims, {1, 1, 2}, HdMode::Slice2D), EmptyMaskError);
    }
}

TEST_CASE("sen_spc examples") {
    std::vector<std::uint8_t> truth{1, 1, 0, 0};
    SUBCASE("perfect prediction") {
        const SenSpc s = sen_spc(truth, truth);
        CHECK(s.sen == 1.0);
        CHECK(s.spc == 1.0);
    }
    SUBCASE("complemented prediction") {
        std::vector<std::uint8_t> pred{0, 0, 1, 1};
        const SenSpc s = sen_spc(pred, truth);
        CHECK(s.sen == 0.0);
        CHECK(s.spc == 0.0);
    }
    SUBCASE("all-zero truth and prediction: spc 1, sen flagged 1") {
        std::vector<std::uint8_t> zero(4, 0);
        const SenSpc s = sen_spc(zero, zero);
        CHECK(s.spc == 1.0);
        CHECK(s.sen == 1.0);
        CHECK(s.sen_degenerate);
        CHECK_FALSE(s.spc_degenerate);
    }
}

TEST_CASE("aggregate: single row, hand arithmetic, median rules") {
    MetricsRow r1{"a", Zone::PG, 0.9, 0.8, 0.99, 1.5};
    SUBCASE("single row: mean = median = value, sd = 0") {
        const auto agg = aggregate({r1});
        const ZoneAggregate& a = agg.at(Zone::PG);
        CHECK(a.dice.mean == 0.9);
        CHECK(a.dice.median == 0.9);
        CHECK(a.dice.sd == 0.0);
        CHECK(a.n == 1);
    }
    SUBCASE("two values 0.9 and 0.94: mean 0.92, sd ~0.0283, median 0.92") {
        MetricsRow r2 = r1;
        r2.case_id = "b";
        r2.dice = 0.94;
        const auto agg = aggregate({r1, r2});
        const ZoneAggregate& a = agg.at(Zone::PG);
        CHECK(a.dice.mean == doctest::Approx(0.92).epsilon(1e-12));
        CHECK(a.dice.sd == doctest::Approx(0.0282842712474619).epsilon(1e-9));
        CHECK(a.dice.median == doctest::Approx(0.92).epsilon(1e-12));
    }
    SUBCASE("odd count takes the middle element") {
        MetricsRow r2 = r1, r3 = r1;
        r2.dice = 0.5;
        r3.dice = 0.7;
        const auto agg = aggregate({r1, r2, r3});
        CHECK(agg.at(Zone::PG).dice.median == doctest::Approx(0.7));
    }
    SUBCASE("empty input is a StatsError") { CHECK_THROWS_AS(aggregate({}), StatsError); }
}

TEST_CASE("welch_t: identity, oracle, separation, monotonicity") {
    SUBCASE("identical samples: t = 0, p = 1 exactly") {
        const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
        const TTestResult r = welch_t(x, x);
        CHECK(r.t == 0.0);
        CHECK(r.p == 1.0);
    }

    SUBCASE("{1..5} vs {2..6} matches the quadrature oracle") {
        const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 3, 4, 5, 6};
        const TTestResult r = welch_t(x, y);
        // classic hand values: t = -1, dof = 8 for equal variances/sizes
        CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(r.dof == doctest::Approx(8.0).epsilon(1e-12));
        const double oracle = testutil::p_two_sided_quadrature(r.t, r.dof);
        CHECK(r.p == doctest::Approx(oracle).epsilon(1e-10));
        CHECK(r.p == doctest::Approx(0.34659351).epsilon(1e-6));
    }

    SUBCASE("widely separated means give p < 1e-6") {
        Rng rng(3);
        std::vector<double> x(20), y(20);
        for (int i = 0; i < 20; ++i) {
            x[i] = rng.normal(0.0, 1.0);
            y[i] = rng.normal(10.0, 1.0); // 10 sigma apart
        }
        const TTestResult r = welch_t(x, y);
        CHECK(r.p < 1e-6);
    }

    SUBCASE("p never increases as |mean difference| grows") {
        const double sd = 1.0;
        double last_p = 1.1;
        for (double delta : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            std::vector<double> x(10), y(10);
            Rng rng(7);
            for (int i = 0; i < 10; ++i) {
                const double noise = rng.normal(0.0, sd);
                x[i] = noise;
                y[i] = noise + delta; // same spread, shifted mean
            }
            const TTestResult r = welch_t(x, y);
            CHECK(r.p <= last_p + 1e-15);
            last_p = r.p;
        }
    }

    SUBCASE("degenerate inputs raise StatsError") {
        CHECK_THROWS_AS(welch_t(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                        StatsError);
        CHECK_THROWS_AS(welch_t(std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, 2.0}),
                        StatsError);
    }

    SUBCASE("incomplete beta sanity: I_x(a,b) + I_{1-x}(b,a) = 1") {
        for (double x : {0.1, 0.35, 0.5, 0.77, 0.93})
            CHECK(incomplete_beta(2.5, 1.5, x) + incomplete_beta(1.5, 2.5, 1 - x) ==
                  doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tabulate and the cohort tabulation report") {
    phantom::PhantomConfig cfg;
    std::vector<CaseRecord> cases;
    std::vector<MaskSet> preds;
    Rng rng(17);
    for (int i = 0; i < 4; ++i) {
        CaseRecord rec = phantom::generate_case(cfg, rng.split(i));
        rec.case_id = "c" + std::to_string(i);
        preds.push_back(rec.truth);
        cases.push_back(std::move(rec));
    }

    SUBCASE("per-case zone stats: zone-constant map has sd 0") {
        phantom::PhantomConfig exact = cfg;
        exact.noise_sd = 0.0;
        exact.sigma_blur_vox = 0.0;
        const CaseRecord rec = phantom::generate_case(exact, Rng(23));
        const auto stats = tabulate(rec, rec.truth);
        REQUIRE(stats.size() == 9); // 3 maps x 3 zones
        for (const auto& zs : stats) {
            if (zs.zone == Zone::CZ && zs.map == MapKind::SWS) {
                CHECK(zs.mean == doctest::Approx(1.25).epsilon(1e-12));
                CHECK(zs.sd == 0.0);
                CHECK(zs.n > 0);
            }
        }
    }

    SUBCASE("predicted == ground truth: identical cells and p = 1") {
        const auto rows = build_tabulation(cases, preds);
        REQUIRE(rows.size() == 3);
        for (const auto& row : rows)
            for (int zi = 0; zi < 3; ++zi) {
                CHECK(row.mask_cols[zi].mean == row.pred_cols[zi].mean);
                CHECK(row.mask_cols[zi].sd == row.pred_cols[zi].sd);
                REQUIRE(row.p[zi].has_value());
                CHECK(*row.p[zi] == 1.0);
            }
        // paired mode agrees in the identical case
        const auto paired = build_tabulation(cases, preds, true);
        for (const auto& row : paired)
            for (int zi = 0; zi < 3; ++zi) CHECK(*row.p[zi] == 1.0);
    }

    SUBCASE("zone voxel accounting: cz + pz <= pg") {
        for (const auto& rec : cases) {
            const auto stats = tabulate(rec, rec.truth);
            std::size_t pg = 0, cz = 0, pz = 0;
            for (const auto& zs : stats) {
                if (zs.map != MapKind::SWS) continue;
                if (zs.zone == Zone::PG) pg = zs.n;
                if (zs.zone == Zone::CZ) cz = zs.n;
                if (zs.zone == Zone::PZ) pz = zs.n;
            }
            CHECK(cz + pz <= pg);
        }
    }
}

TEST_CASE("report files carry the pinned headers") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "zoneforge_report_tests";
    fs::create_directories(dir);

    std::vector<MetricsRow> rows{{"c0", Zone::PG, 0.9, 0.8, 0.99, 1.0},
                                 {"c0", Zone::CZ, 0.8, 0.7, 0.99, 2.0},
                                 {"c0", Zone::PZ, 0.7, 0.6, 0.99, std::nullopt}};
    write_metrics_csv(rows, dir / "metrics.csv");
    write_summary_csv("im_mag", aggregate(rows), dir / "summary.csv");

    auto first_line = [](const fs::path& p) {
        std::ifstream in(p);
        std::string line;
        std::getline(in, line);
        return line;
    };
    CHECK(first_line(dir / "metrics.csv") == "case_id,zone,DS,Sen,Spc,HD_mm");
    CHECK(first_line(dir / "summary.csv") ==
          "model,pg_dice,pg_std,pg_median,pg_sen,pg_spc,pg_hd,"
          "cz_dice,cz_std,cz_median,cz_sen,cz_spc,cz_hd,"
          "pz_dice,pz_std,pz_median,pz_sen,pz_spc,pz_hd");

    phantom::PhantomConfig cfg;
    std::vector<CaseRecord> cases;
    std::vector<MaskSet> preds;
    for (int i = 0; i < 3; ++i) {
        CaseRecord rec = phantom::generate_case(cfg, Rng(40 + i));
        preds.push_back(rec.truth);
        cases.push_back(std::move(rec));
    }
    write_tabulation_csv(build_tabulation(cases, preds), dir / "tabulation.csv");
    CHECK(first_line(dir / "tabulation.csv") ==
          "Map,PG mask,PG predicted,CZ mask,CZ predicted,PZ mask,PZ predicted,"
          "PG P-value,CZ P-value,PZ P-value");
}
