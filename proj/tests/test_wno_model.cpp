#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "rpwno/wno.hpp"
#include "test_util.hpp"

using namespace rpwno;
using rpwno::test::random_tensor;

namespace {

WnoConfig tiny_1d(std::size_t grid = 16, std::size_t width = 4, std::size_t blocks = 1) {
    WnoConfig c = burgers_config(grid);
    c.width = width;
    c.num_blocks = blocks;
    c.proj_hidden = 6;
    c.wavelet_order = 2;
    return c;
}

WnoConfig tiny_2d(std::size_t grid = 16, std::size_t width = 4) {
    WnoConfig c = darcy_config(grid);
    c.width = width;
    c.num_blocks = 2;
    c.proj_hidden = 5;
    c.wavelet_order = 2;
    return c;
}

Tensor to_channel_first(const Tensor& x) {
    const std::size_t s = x.extent(0), p = x.shape().back(), n = x.sample_size() / p;
    Shape shp{s, p};
    shp.insert(shp.end(), x.shape().begin() + 1, x.shape().end() - 1);
    Tensor out(shp);
    for (std::size_t b = 0; b < s; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < p; ++k) out[(b * p + k) * n + i] = x[(b * n + i) * p + k];
    return out;
}

Tensor to_channel_last(const Tensor& x) {
    const std::size_t s = x.extent(0), p = x.extent(1), n = x.sample_size() / p;
    Shape shp{s};
    shp.insert(shp.end(), x.shape().begin() + 2, x.shape().end());
    shp.push_back(p);
    Tensor out(shp);
    for (std::size_t b = 0; b < s; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < p; ++k) out[(b * n + i) * p + k] = x[(b * p + k) * n + i];
    return out;
}

// coef[s, k, loc] -> sum_k W[k, o, loc] coef[s, k, loc]
void mix_inplace(Tensor& coef, const Tensor& w) {
    const std::size_t s = coef.extent(0), p = coef.extent(1), m = coef.sample_size() / p;
    Tensor out(coef.shape());
    for (std::size_t b = 0; b < s; ++b)
        for (std::size_t o = 0; o < p; ++o)
            for (std::size_t l = 0; l < m; ++l) {
                double acc = 0;
                for (std::size_t k = 0; k < p; ++k) acc += w[(k * p + o) * m + l] * coef[(b * p + k) * m + l];
                out[(b * p + o) * m + l] = acc;
            }
    coef = out;
}

// Literal wavelet-mapping component: full multi-level DWT, mix the learned final-level
// bands, inverse DWT.
Tensor reference_wmc(const Tensor& x, const WaveletBlock& block, const WnoConfig& cfg) {
    const auto f = daubechies_filters(cfg.wavelet_order);
    Tensor xc = to_channel_first(x);
    if (cfg.spatial_dims == 1) {
        auto c = dwt1d(xc, f, cfg.levels);
        for (std::size_t i = 0; i < cfg.learned_subbands.size(); ++i) {
            Tensor& t = cfg.learned_subbands[i] == Subband::Approx ? c.approx : c.details.back();
            mix_inplace(t, block.subband_weights[i].value);
        }
        return to_channel_last(idwt1d(c, f));
    }
    auto c = dwt2d(xc, f, cfg.levels);
    for (std::size_t i = 0; i < cfg.learned_subbands.size(); ++i) {
        auto& d = c.details.back();
        Tensor* t = nullptr;
        switch (cfg.learned_subbands[i]) {
            case Subband::LL: t = &c.approx; break;
            case Subband::LH: t = &d.lh; break;
            case Subband::HL: t = &d.hl; break;
            case Subband::HH: t = &d.hh; break;
            default: FAIL("bad band");
        }
        mix_inplace(*t, block.subband_weights[i].value);
    }
    return to_channel_last(idwt2d(c, f));
}

void set_identity_subbands(WaveletBlock& blk, std::size_t p) {
    for (auto& w : blk.subband_weights) {
        const std::size_t m = w.value.numel() / (p * p);
        w.value.fill(0.0);
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t l = 0; l < m; ++l) w.value[(k * p + k) * m + l] = 1.0;
    }
}

Tensor model_input(const WnoConfig& c, std::size_t samples, std::mt19937_64& rng) {
    Shape s{samples};
    s.insert(s.end(), c.grid.begin(), c.grid.end());
    s.push_back(c.in_channels());
    return random_tensor(s, rng);
}

}  // namespace

TEST_CASE("config defaults and validation") {
    auto b = burgers_config(128);
    CHECK(b.levels == 5);
    CHECK(b.width == 64);
    CHECK(b.proj_hidden == 128);
    CHECK(b.in_channels() == 2);
    CHECK(burgers_config(1024).levels == 8);
    auto d = darcy_config(32);
    CHECK(d.levels == 3);
    CHECK(d.proj_hidden == 192);
    CHECK(d.in_channels() == 3);
    CHECK(darcy_config(128).levels == 4);
    CHECK_NOTHROW(validate(b));
    CHECK_NOTHROW(validate(d));

    auto bad = b;
    bad.width = 2;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.levels = 8;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.learned_subbands = {Subband::Detail};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.learned_subbands = {};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.learned_subbands = {Subband::LL};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.grid = {100};
    bad.levels = 3;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = b;
    bad.grid = {127};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    CHECK(subband_from_string("HL") == Subband::HL);
    CHECK_THROWS(subband_from_string("XY"));
}

TEST_CASE("parameter count formula matches construction") {
    for (const auto& cfg : {burgers_config(64), darcy_config(32), tiny_1d(), tiny_2d()}) {
        WnoModel m(cfg, 1);
        std::size_t n = 0;
        for (const auto* p : m.parameters()) n += p->value.numel();
        CHECK(n == parameter_count(cfg));
    }
}

TEST_CASE("lift") {
    auto cfg = burgers_config(64);
    cfg.width = 32;
    WnoModel m(cfg, 7);
    std::mt19937_64 rng(1);
    Tensor in = random_tensor({4, 64, 2}, rng);
    Tape t;
    CHECK(lift(t, t.constant(in), std::as_const(m)).value().shape() == Shape{4, 64, 32});

    // With two input functions the lifted input has three channels.
    auto cfg3 = cfg;
    cfg3.function_channels = 2;
    WnoModel m3(cfg3, 7);
    CHECK(lift(t, t.constant(random_tensor({4, 64, 3}, rng)), std::as_const(m3)).value().shape() ==
          Shape{4, 64, 32});
    CHECK_THROWS_AS(lift(t, t.constant(random_tensor({4, 64, 3}, rng)), std::as_const(m)), std::invalid_argument);

    m.lift_weight.value.fill(0.0);
    m.lift_bias.value.fill(0.0);
    for (double v : lift(t, t.constant(in), std::as_const(m)).value().values()) CHECK(v == 0.0);

    WnoModel g(tiny_1d(), 3);
    Tensor x = model_input(g.config(), 2, rng);
    Tensor r = random_tensor({2, 16, 4}, rng);
    rpwno::test::LossFn f = [&](Tape& tt) { return rpwno::test::weighted_sum(tt, lift(tt, tt.constant_ref(x), g), r); };
    CHECK(rpwno::test::parameter_gradcheck(f, {&g.lift_weight, &g.lift_bias}) <= 1e-5);
}

TEST_CASE("wmc matches the literal transform-mix-inverse path") {
    std::mt19937_64 rng(5);
    for (const auto& base : {tiny_1d(32, 5), tiny_2d(16, 4)}) {
        for (int order : {1, 2, 6}) {
            for (std::size_t levels : {1u, 2u, 3u}) {
                auto cfg = base;
                cfg.wavelet_order = order;
                cfg.levels = levels;
                if (cfg.spatial_dims == 2) cfg.learned_subbands = {Subband::LL, Subband::HL, Subband::HH};
                WnoModel m(cfg, 11);
                Shape s{3};
                s.insert(s.end(), cfg.grid.begin(), cfg.grid.end());
                s.push_back(cfg.width);
                Tensor x = random_tensor(s, rng);
                Tape t;
                Var y = wmc_forward(t, t.constant(x), std::as_const(m.blocks[0]), m.basis(), cfg.learned_subbands);
                CHECK(y.value().shape() == x.shape());
                CHECK(max_abs_diff(y.value(), reference_wmc(x, m.blocks[0], cfg)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("wmc identity and zero weights") {
    std::mt19937_64 rng(6);
    SUBCASE("identity weights on all bands reproduce the input") {
        auto cfg = tiny_2d(16, 4);
        cfg.learned_subbands = {Subband::LL, Subband::LH, Subband::HL, Subband::HH};
        WnoModel m(cfg, 1);
        set_identity_subbands(m.blocks[0], 4);
        Tensor x = random_tensor({2, 16, 16, 4}, rng);
        Tape t;
        Var y = wmc_forward(t, t.constant(x), std::as_const(m.blocks[0]), m.basis(), cfg.learned_subbands);
        CHECK(max_abs_diff(y.value(), x) <= 1e-8);
    }
    SUBCASE("zero weights leave only the finer details") {
        auto cfg = tiny_2d(16, 4);
        cfg.levels = 4;
        cfg.learned_subbands = {Subband::LL, Subband::LH, Subband::HL, Subband::HH};
        WnoModel m(cfg, 1);
        for (auto& w : m.blocks[0].subband_weights) w.value.fill(0.0);
        Tensor x = random_tensor({2, 16, 16, 4}, rng);
        Tape t;
        Var y = wmc_forward(t, t.constant(x), std::as_const(m.blocks[0]), m.basis(), cfg.learned_subbands);
        // Finer details still pass through, so only the final-level contribution vanishes.
        CHECK(max_abs_diff(y.value(), reference_wmc(x, m.blocks[0], cfg)) <= 1e-12);
        auto cfg1 = tiny_1d(16, 3);
        cfg1.levels = 1;
        WnoModel m1(cfg1, 1);
        for (auto& w : m1.blocks[0].subband_weights) w.value.fill(0.0);
        Tensor x1 = random_tensor({2, 16, 3}, rng);
        Var y1 = wmc_forward(t, t.constant(x1), std::as_const(m1.blocks[0]), m1.basis(), cfg1.learned_subbands);
        CHECK(max_abs_diff(y1.value(), Tensor(x1.shape())) <= 1e-12);
    }
    SUBCASE("zero weights at a single level, all bands learned: zero output in 2D") {
        auto cfg = tiny_2d(8, 4);
        cfg.levels = 1;
        cfg.learned_subbands = {Subband::LL, Subband::LH, Subband::HL, Subband::HH};
        WnoModel m(cfg, 1);
        for (auto& w : m.blocks[0].subband_weights) w.value.fill(0.0);
        Tensor x = random_tensor({1, 8, 8, 4}, rng);
        Tape t;
        Var y = wmc_forward(t, t.constant(x), std::as_const(m.blocks[0]), m.basis(), cfg.learned_subbands);
        CHECK(max_abs_diff(y.value(), Tensor(x.shape())) <= 1e-12);
    }
}

TEST_CASE("wmc and cmc gradients match finite differences") {
    std::mt19937_64 rng(8);
    for (const auto& cfg : {tiny_1d(16, 3), tiny_2d(8, 4)}) {
        WnoModel m(cfg, 2);
        Shape s{2};
        s.insert(s.end(), cfg.grid.begin(), cfg.grid.end());
        s.push_back(cfg.width);
        Tensor x = random_tensor(s, rng);
        Tensor r = random_tensor(s, rng);
        auto& blk = m.blocks[0];
        rpwno::test::LossFn fw = [&](Tape& t) {
            return rpwno::test::weighted_sum(t, wmc_forward(t, t.constant_ref(x), blk, m.basis(), cfg.learned_subbands), r);
        };
        std::vector<Parameter*> ws;
        for (auto& w : blk.subband_weights) ws.push_back(&w);
        CHECK(rpwno::test::parameter_gradcheck(fw, ws) <= 1e-5);

        Tape t;
        Var leaf = t.leaf(x);
        t.backward(rpwno::test::weighted_sum(t, wmc_forward(t, leaf, std::as_const(blk), m.basis(), cfg.learned_subbands), r));
        rpwno::test::LossFn fx = [&](Tape& tt) {
            return rpwno::test::weighted_sum(tt, wmc_forward(tt, tt.constant_ref(x), std::as_const(blk), m.basis(), cfg.learned_subbands), r);
        };
        CHECK(rpwno::test::relative_error(t.grad(leaf), rpwno::test::numeric_gradient(fx, x)) <= 1e-5);

        rpwno::test::LossFn fc = [&](Tape& tt) { return rpwno::test::weighted_sum(tt, cmc_forward(tt, tt.constant_ref(x), blk), r); };
        CHECK(rpwno::test::parameter_gradcheck(fc, {&blk.conv_weight, &blk.conv_bias}) <= 1e-5);
    }
}

TEST_CASE("cmc and block composition") {
    std::mt19937_64 rng(9);
    auto cfg = tiny_1d(16, 4);
    WnoModel m(cfg, 4);
    auto& blk = m.blocks[0];
    Tensor x = random_tensor({2, 16, 4}, rng);
    Tape t;
    Var xv = t.constant(x);

    blk.conv_weight.value.fill(0.0);
    for (std::size_t k = 0; k < 4; ++k) blk.conv_weight.value[k * 4 + k] = 1.0;
    blk.conv_bias.value.fill(0.0);
    Var c = cmc_forward(t, xv, std::as_const(blk));
    CHECK(c.value() == x);
    CHECK_THROWS_AS(cmc_forward(t, t.constant(Tensor({2, 16, 3})), std::as_const(blk)), std::invalid_argument);

    WnoModel fresh(cfg, 5);
    auto& b2 = fresh.blocks[0];
    Var w = wmc_forward(t, xv, std::as_const(b2), fresh.basis(), cfg.learned_subbands);
    Var cm = cmc_forward(t, xv, std::as_const(b2));
    Var blkout = block_forward(t, xv, std::as_const(b2), fresh.basis(), cfg.learned_subbands, false);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(blkout.value()[i] == w.value()[i] + cm.value()[i]);
    Var act = block_forward(t, xv, std::as_const(b2), fresh.basis(), cfg.learned_subbands, true);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(act.value()[i] == gelu_value(blkout.value()[i]));

    // Identity wavelet weights + zero conv + no activation is the identity map.
    set_identity_subbands(b2, 4);
    b2.conv_weight.value.fill(0.0);
    b2.conv_bias.value.fill(0.0);
    Var ident = block_forward(t, xv, std::as_const(b2), fresh.basis(), cfg.learned_subbands, false);
    CHECK(max_abs_diff(ident.value(), x) <= 1e-8);

    // Both components zero-weighted: with a single level and every band learned nothing passes.
    auto zcfg = tiny_1d(16, 4);
    zcfg.levels = 1;
    WnoModel z(zcfg, 6);
    for (auto& wz : z.blocks[0].subband_weights) wz.value.fill(0.0);
    z.blocks[0].conv_weight.value.fill(0.0);
    z.blocks[0].conv_bias.value.fill(0.0);
    Var zo = block_forward(t, xv, std::as_const(z.blocks[0]), z.basis(), zcfg.learned_subbands, true);
    CHECK(max_abs_diff(zo.value(), Tensor(x.shape())) <= 1e-12);
}

TEST_CASE("projection head") {
    auto cfg = burgers_config(64);
    WnoModel m(cfg, 1);
    CHECK(m.proj_hidden_weight.value.shape() == Shape{64, 128});
    CHECK(m.proj_out_weight.value.shape() == Shape{128, 1});
    std::mt19937_64 rng(2);
    Tape t;
    Tensor x = random_tensor({2, 64, 64}, rng);
    CHECK(project(t, t.constant(x), std::as_const(m)).value().shape() == Shape{2, 64, 1});
    auto d = darcy_config(16);
    d.width = 8;
    WnoModel md(d, 1);
    CHECK(project(t, t.constant(random_tensor({2, 16, 16, 8}, rng)), std::as_const(md)).value().shape() ==
          Shape{2, 16, 16, 1});
    for (auto* p : {&m.proj_hidden_weight, &m.proj_hidden_bias, &m.proj_out_weight, &m.proj_out_bias}) p->value.fill(0.0);
    for (double v : project(t, t.constant(x), std::as_const(m)).value().values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(project(t, t.constant(random_tensor({2, 64, 7}, rng)), std::as_const(m)), std::invalid_argument);
}

TEST_CASE("wno_forward shape contract and activation placement") {
    std::mt19937_64 rng(3);
    auto c1 = burgers_config(64);
    c1.width = 8;
    c1.proj_hidden = 8;
    auto c2 = darcy_config(32);
    c2.width = 8;
    c2.proj_hidden = 8;
    for (const auto& cfg : {c1, c2}) {
        WnoModel m(cfg, 1);
        Tensor in = model_input(cfg, 3, rng);
        Tensor out = wno_predict(m, in);
        Shape expect = in.shape();
        expect.back() = 1;
        CHECK(out.shape() == expect);
        CHECK(out.all_finite());

        // Manual composition: GeLU after every block except the last.
        Tape t;
        Var x = lift(t, t.constant(in), std::as_const(m));
        REQUIRE(m.blocks.size() == 4);
        for (std::size_t b = 0; b < 4; ++b) {
            Var y = add(wmc_forward(t, x, std::as_const(m.blocks[b]), m.basis(), cfg.learned_subbands),
                        cmc_forward(t, x, std::as_const(m.blocks[b])));
            x = b < 3 ? gelu(y) : y;
        }
        Var manual = project(t, x, std::as_const(m));
        CHECK(manual.value() == out);
    }
}

TEST_CASE("full tiny WNO gradient check") {
    std::mt19937_64 rng(12);
    auto cfg = tiny_1d(16, 4, 1);
    WnoModel m(cfg, 21);
    Tensor in = model_input(cfg, 2, rng);
    Tensor r = random_tensor({2, 16, 1}, rng);
    rpwno::test::LossFn f = [&](Tape& t) { return rpwno::test::weighted_sum(t, wno_forward(t, t.constant_ref(in), m), r); };
    CHECK(rpwno::test::parameter_gradcheck(f, m.parameters()) <= 1e-4);

    auto cfg2 = tiny_2d(8, 4);
    cfg2.levels = 2;
    WnoModel m2(cfg2, 22);
    Tensor in2 = model_input(cfg2, 2, rng);
    Tensor r2 = random_tensor({2, 8, 8, 1}, rng);
    rpwno::test::LossFn f2 = [&](Tape& t) { return rpwno::test::weighted_sum(t, wno_forward(t, t.constant_ref(in2), m2), r2); };
    CHECK(rpwno::test::parameter_gradcheck(f2, m2.parameters()) <= 1e-4);
}

TEST_CASE("frozen binding records no gradients") {
    std::mt19937_64 rng(13);
    WnoModel m(tiny_1d(), 1);
    Tensor in = model_input(m.config(), 2, rng);
    m.zero_grad();
    Tape t;
    Var leaf = t.leaf(in);
    t.backward(sum(wno_forward(t, leaf, std::as_const(m))));
    for (const auto* p : std::as_const(m).parameters())
        for (double g : p->grad.values()) CHECK(g == 0.0);
}

TEST_CASE("batch equivariance") {
    std::mt19937_64 rng(14);
    auto cfg = tiny_2d(16, 6);
    WnoModel m(cfg, 3);
    Tensor in = model_input(cfg, 5, rng);
    Tensor out = wno_predict(m, in, 5);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Tensor pout = wno_predict(m, in.gather(perm), 5);
    CHECK(pout == out.gather(perm));
    // Sample results do not depend on chunking either.
    CHECK(wno_predict(m, in, 2) == out);
}

TEST_CASE("initialization is seeded and bounded") {
    auto cfg = tiny_1d(32, 8);
    WnoModel a(cfg, 5), b(cfg, 5), c(cfg, 6);
    CHECK(parameter_checksum(a) == parameter_checksum(b));
    CHECK(parameter_checksum(a) != parameter_checksum(c));
    const double bound = 1.0 / std::sqrt(8.0);
    for (double v : a.blocks[0].conv_weight.value.values()) CHECK(std::abs(v) <= bound);
    CHECK(a.blocks[0].subband_weights[0].value.shape() == Shape{8, 8, 32u >> cfg.levels});
}
