#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "zoneforge/unet/net.hpp"

using namespace zoneforge;
using namespace zoneforge::unet;

namespace {

Tensor4<double> random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0,
                              double hi = 1.0) {
    Tensor4<double> t(n, c, h, w);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("conv2d basics") {
    SUBCASE("1x1 identity kernel maps input to itself") {
        Rng rng(1);
        const Tensor4<double> x = random_tensor(2, 1, 5, 5, rng);
        Tensor4<double> w(1, 1, 1, 1);
        w.v[0] = 1.0;
        const Tensor4<double> y = conv2d(x, w, std::vector<double>{0.0}, 0);
        CHECK(y.v == x.v);
    }

    SUBCASE("3x3 all-ones kernel sums the window: interior of a constant is 9c") {
        const double c = 0.7;
        Tensor4<double> x(1, 1, 6, 6);
        std::fill(x.v.begin(), x.v.end(), c);
        Tensor4<double> w(1, 1, 3, 3);
        std::fill(w.v.begin(), w.v.end(), 1.0);
        const Tensor4<double> y = conv2d(x, w, std::vector<double>{0.0}, 1);
        CHECK(y.same_shape(x));
        for (int iy = 1; iy < 5; ++iy)
            for (int ix = 1; ix < 5; ++ix)
                CHECK(y.at(0, 0, iy, ix) == doctest::Approx(9.0 * c).epsilon(1e-12));
        CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4.0 * c).epsilon(1e-12)); // corner
    }

    SUBCASE("channel mismatch raises ShapeError") {
        Tensor4<double> x(1, 2, 4, 4), w(1, 3, 3, 3);
        CHECK_THROWS_AS(conv2d(x, w, std::vector<double>{0.0}, 1), ShapeError);
    }

    SUBCASE("translation covariance away from borders") {
        Rng rng(2);
        Tensor4<double> x = random_tensor(1, 1, 12, 12, rng);
        Tensor4<double> xs(1, 1, 12, 12); // x shifted by (1, 0)
        for (int iy = 0; iy < 12; ++iy)
            for (int ix = 1; ix < 12; ++ix) xs.at(0, 0, iy, ix) = x.at(0, 0, iy, ix - 1);
        Tensor4<double> w = random_tensor(2, 1, 3, 3, rng);
        const std::vector<double> b{0.1, -0.2};
        const Tensor4<double> y = conv2d(x, w, b, 1);
        const Tensor4<double> ys = conv2d(xs, w, b, 1);
        for (int oc = 0; oc < 2; ++oc)
            for (int iy = 2; iy < 10; ++iy)
                for (int ix = 3; ix < 10; ++ix)
                    CHECK(ys.at(0, oc, iy, ix) ==
                          doctest::Approx(y.at(0, oc, iy, ix - 1)).epsilon(1e-12));
    }
}

TEST_CASE("conv2d gradients match central finite differences") {
    Rng rng(7);
    const Tensor4<double> x0 = random_tensor(2, 3, 8, 8, rng);
    const Tensor4<double> w0 = random_tensor(4, 3, 3, 3, rng, -0.5, 0.5);
    std::vector<double> b0 = {0.1, -0.3, 0.2, 0.0};
    const Tensor4<double> cot = random_tensor(2, 4, 8, 8, rng); // fixed cotangent

    // loss = <conv(x, w, b), cot>
    Tensor4<double> x = x0;
    Tensor4<double> w = w0;
    std::vector<double> b = b0;
    auto value = [&]() {
        const Tensor4<double> y = conv2d(x, w, b, 1);
        double s = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * cot.v[i];
        return s;
    };
    Tensor4<double> dx, dw;
    std::vector<double> db;
    conv2d_grads(x, w, cot, 1, &dx, &dw, &db);

    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < w.v.size(); i += 3) coords.push_back(i);
    auto stw = testutil::fd_check(w.v, value, dw.v, coords);
    CHECK(stw.max <= 1e-3);

    coords.clear();
    for (std::size_t i = 0; i < x.v.size(); i += 7) coords.push_back(i);
    auto stx = testutil::fd_check(x.v, value, dx.v, coords);
    CHECK(stx.max <= 1e-3);

    coords = {0, 1, 2, 3};
    auto stb = testutil::fd_check(b, value, db, coords);
    CHECK(stb.max <= 1e-3);
}

TEST_CASE("dense block arithmetic and gradients") {
    SUBCASE("C=16, growth 8 gives 48 output channels") {
        Rng rng(3);
        const auto wb = DenseBlockWeights<double>::init(16, 8, rng);
        const Tensor4<double> x = random_tensor(1, 16, 8, 8, rng);
        const Tensor4<double> y = dense_block(x, wb);
        CHECK(y.c == 48);
        CHECK(y.h == 8);
        // the first 16 channels are the block input itself
        for (int iy = 0; iy < 8; ++iy)
            for (int ix = 0; ix < 8; ++ix)
                CHECK(y.at(0, 3, iy, ix) == x.at(0, 3, iy, ix));
    }

    SUBCASE("zero input and zero biases give zero output") {
        Rng rng(4);
        const auto wb = DenseBlockWeights<double>::init(6, 4, rng);
        const Tensor4<double> x(1, 6, 8, 8);
        const Tensor4<double> y = dense_block(x, wb);
        for (double v : y.v) CHECK(v == 0.0);
    }

    SUBCASE("finite-difference gradcheck of the whole block") {
        Rng rng(5);
        auto wb = DenseBlockWeights<double>::init(5, 3, rng);
        Tensor4<double> x = random_tensor(1, 5, 6, 6, rng);
        const Tensor4<double> cot = random_tensor(1, 5 + 4 * 3, 6, 6, rng);

        auto value = [&]() {
            const Tensor4<double> y = dense_block(x, wb);
            double s = 0.0;
            for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * cot.v[i];
            return s;
        };
        Tensor4<double> dx;
        DenseBlockWeights<double> dwb;
        dense_block_grads(x, wb, cot, &dx, &dwb);

        for (int l = 0; l < 4; ++l) {
            std::vector<std::size_t> coords;
            for (std::size_t i = 0; i < wb.w[l].v.size(); i += 5) coords.push_back(i);
            auto st = testutil::fd_check(wb.w[l].v, value, dwb.w[l].v, coords);
            CHECK(st.max <= 1e-3);
        }
        std::vector<std::size_t> coords;
        for (std::size_t i = 0; i < x.v.size(); i += 3) coords.push_back(i);
        auto st = testutil::fd_check(x.v, value, dx.v, coords);
        CHECK(st.max <= 1e-3);
    }
}

TEST_CASE("transitions") {
    SUBCASE("transition_down averages: 4x4 constant becomes 2x2 constant") {
        Tensor4<double> x(1, 2, 4, 4);
        std::fill(x.v.begin(), x.v.end(), 3.0);
        Tensor4<double> w(1, 2, 1, 1);
        w.v = {0.5, 0.5};
        const Tensor4<double> y = transition_down(x, w, std::vector<double>{0.0});
        CHECK(y.c == 1);
        CHECK(y.h == 2);
        for (double v : y.v) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
    }

    SUBCASE("C=48 at theta 0.5 compresses to 24 channels") {
        const ArchConfig arch = ArchConfig::desk(1);
        const Layout lt = build_layout(arch);
        CHECK(lt.enc_out[0] == 48);
        CHECK(lt.td_out[0] == 24);
    }

    SUBCASE("upsample duplicates 2x2 blocks; transition_up concatenates the skip") {
        Tensor4<double> x(1, 1, 2, 2);
        x.v = {1, 2, 3, 4};
        const Tensor4<double> up = upsample2_nearest(x);
        CHECK(up.h == 4);
        CHECK(up.at(0, 0, 0, 0) == 1);
        CHECK(up.at(0, 0, 0, 1) == 1);
        CHECK(up.at(0, 0, 1, 1) == 1);
        CHECK(up.at(0, 0, 2, 3) == 4);

        Tensor4<double> w(2, 1, 1, 1);
        w.v = {1.0, -1.0};
        Tensor4<double> skip(1, 3, 4, 4);
        const Tensor4<double> y = transition_up(x, skip, w, std::vector<double>{0.0, 0.0});
        CHECK(y.c == 5);
        CHECK(y.at(0, 0, 3, 3) == 4.0);
        CHECK(y.at(0, 1, 3, 3) == -4.0);
    }
}

TEST_CASE("layout channel bookkeeping follows the closed form") {
    for (const ArchConfig arch :
         {ArchConfig::desk(1), ArchConfig::desk(6), ArchConfig::toy(2), ArchConfig::paper(3)}) {
        const Layout lt = build_layout(arch);
        int cur = arch.stem_channels;
        for (int s = 0; s < arch.n_stages; ++s) {
            CHECK(lt.enc_in[s] == cur);
            CHECK(lt.enc_out[s] == cur + 4 * arch.growth);
            const int tdc = static_cast<int>(
                std::ceil(arch.compression * lt.enc_out[s] - 1e-9));
            CHECK(lt.td_out[s] == tdc);
            cur = tdc;
        }
        CHECK(lt.bottleneck_out == cur + 4 * arch.growth);
        cur = lt.bottleneck_out;
        for (int s = arch.n_stages - 1; s >= 0; --s) {
            const int up = static_cast<int>(std::ceil(arch.compression * cur - 1e-9));
            CHECK(lt.tu_out[s] == up);
            CHECK(lt.dec_in[s] == up + lt.enc_out[s]);
            CHECK(lt.dec_out[s] == lt.dec_in[s] + 4 * arch.growth);
            cur = lt.dec_out[s];
        }
        // parameter count is a pure function of the architecture
        CHECK(param_count(arch) == build_layout(arch).param_count);
    }
}

TEST_CASE("init_params: determinism, zero biases, He variance") {
    const ArchConfig arch = ArchConfig::desk(1);
    const auto a = init_params(arch, Rng(11));
    const auto b = init_params(arch, Rng(11));
    CHECK(a.flat == b.flat);
    const auto c = init_params(arch, Rng(12));
    CHECK(a.flat != c.flat);

    const Layout lt = build_layout(arch);
    for (const ConvSpec* s : lt.ordered())
        for (int oc = 0; oc < s->out_c; ++oc)
            CHECK(a.flat[s->b_off + oc] == 0.0f);

    // a 3x3 kernel stack over 16 input channels: fan_in = 144, >= 1e4 entries
    const auto wb = DenseBlockWeights<double>::init(16, 70, Rng(21));
    REQUIRE(wb.w[0].v.size() >= 10000);
    double ss = 0.0;
    for (double d : wb.w[0].v) ss += d * d;
    const double var = ss / static_cast<double>(wb.w[0].v.size());
    const double expect = 2.0 / 144.0;
    CHECK(var > 0.8 * expect);
    CHECK(var < 1.2 * expect);
}

TEST_CASE("forward: shape, range, determinism, totality over random archs") {
    SUBCASE("desk net on 1x1x16x16") {
        const ArchConfig arch = ArchConfig::toy(1);
        const auto net = init_params(arch, Rng(3));
        Rng rng(4);
        Tensor4<float> x(1, 1, 16, 16);
        for (float& v : x.v) v = static_cast<float>(rng.uniform(-2, 2));
        const Tensor4<float> y = forward(net, x);
        CHECK(y.n == 1);
        CHECK(y.c == 3);
        CHECK(y.h == 16);
        CHECK(y.w == 16);
        for (float v : y.v) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
        const Tensor4<float> y2 = forward(net, x);
        CHECK(y.v == y2.v); // bit-identical
    }

    SUBCASE("shape violations raise ShapeError") {
        const ArchConfig arch = ArchConfig::toy(2);
        const auto net = init_params(arch, Rng(5));
        Tensor4<float> wrong_c(1, 1, 16, 16);
        CHECK_THROWS_AS(forward(net, wrong_c), ShapeError);
        Tensor4<float> wrong_hw(1, 2, 10, 10); // not divisible by 4
        CHECK_THROWS_AS(forward(net, wrong_hw), ShapeError);
    }

    SUBCASE("randomized valid architectures all run") {
        Rng rng(17);
        for (int rep = 0; rep < 8; ++rep) {
            ArchConfig arch;
            arch.in_channels = 1 + static_cast<int>(rng.below(6));
            arch.n_stages = 1 + static_cast<int>(rng.below(3));
            arch.growth = 2 + static_cast<int>(rng.below(6));
            arch.stem_channels = 4 + static_cast<int>(rng.below(12));
            arch.compression = rng.uniform(0.3, 1.0);
            const int f = arch.pool_factor();
            const int hw = f * (1 + static_cast<int>(rng.below(3)));
            const auto net = init_params(arch, rng.split(rep));
            Tensor4<float> x(1, arch.in_channels, hw, hw);
            for (float& v : x.v) v = static_cast<float>(rng.uniform(-1, 1));
            const Tensor4<float> y = forward(net, x);
            CHECK(y.c == 3);
            CHECK(y.h == hw);
            CHECK(y.w == hw);
        }
    }
}

TEST_CASE("composed network gradients on a random parameter subset") {
    const ArchConfig arch = ArchConfig::toy(1);
    auto net = init_params_t<double>(arch, Rng(23));
    Rng rng(29);
    Tensor4<double> x(1, 1, 8, 8);
    for (double& v : x.v) v = rng.uniform(-1.5, 1.5);
    Tensor4<double> cot(1, 3, 8, 8);
    for (double& v : cot.v) v = rng.uniform(-1, 1);

    const DenseUnet<double> engine(arch);
    Cache<double> cache;
    auto value = [&]() {
        Cache<double> c;
        const Tensor4<double> y = engine.forward(net.flat, x, c);
        double s = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * cot.v[i];
        return s;
    };
    engine.forward(net.flat, x, cache);
    std::vector<double> grad(net.flat.size());
    engine.backward(net.flat, cache, cot, grad);

    std::vector<std::size_t> coords;
    Rng pick(31);
    for (int i = 0; i < 220; ++i) coords.push_back(pick.below(net.flat.size()));
    const auto st = testutil::fd_check(net.flat, value, grad, coords);
    CHECK(st.p95 <= 1e-3);
    CHECK(st.max <= 1e-2);
}
