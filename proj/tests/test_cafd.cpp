#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmcse/cafd.hpp"
#include "mmcse/gradcheck.hpp"
#include "mmcse/ops.hpp"

using namespace mmcse;
using namespace mmcse::testing;

namespace {

ModelConfig tiny_config(index_t t_unused = 0) {
    (void)t_unused;
    ModelConfig cfg;
    cfg.num_classes = 2;
    cfg.raw_dim_a = 3;
    cfg.raw_dim_v = 3;
    cfg.d1 = 3;
    cfg.d2 = 2;
    cfg.num_layers = 0;
    return cfg;
}

}  // namespace

TEST_CASE("encode_inputs: zero params give zero features") {
    ModelConfig cfg = tiny_config();
    CafdParams params;
    for (int m = 0; m < 2; ++m) params.encoder[m] = zero_linear(3, 3);
    Rng rng(3);
    Tensor raw = Tensor::uniform({4, 3}, -1.0, 1.0, rng);
    auto f = encode_inputs(cfg, params, raw, raw);
    for (int m = 0; m < 2; ++m)
        CHECK(f[m].values() == std::vector<double>(12, 0.0));
}

TEST_CASE("encode_inputs: identity weights pass non-negative input through") {
    ModelConfig cfg = tiny_config();
    CafdParams params;
    for (int m = 0; m < 2; ++m)
        params.encoder[m] = {identity_matrix(3), Tensor::zeros({3}, true)};
    Rng rng(4);
    Tensor raw = Tensor::uniform({5, 3}, 0.0, 2.0, rng);
    auto f = encode_inputs(cfg, params, raw, raw);
    CHECK(bitwise_equal(f[kAudio], raw));
    CHECK(bitwise_equal(f[kVisual], raw));
}

TEST_CASE("encode_inputs rejects features that disagree with the manifest") {
    ModelConfig cfg = tiny_config();
    CafdParams params;
    for (int m = 0; m < 2; ++m) params.encoder[m] = zero_linear(3, 3);
    Tensor ok = Tensor::zeros({4, 3});
    Tensor bad = Tensor::zeros({4, 5});
    CHECK_THROWS_AS(encode_inputs(cfg, params, bad, ok), ShapeError);
    CHECK_THROWS_AS(encode_inputs(cfg, params, ok, Tensor::zeros({3, 3})),
                    ShapeError);
}

TEST_CASE("decouple: zero heads give zero slices; head count enforced") {
    ModelConfig cfg = tiny_config();
    CafdParams params;
    for (int m = 0; m < 2; ++m)
        for (index_t k = 0; k < cfg.num_slices(); ++k)
            params.heads[m].push_back(zero_linear(3, 2));
    Tensor f = Tensor::full({4, 3}, 1.0);
    Tensor dec = decouple(cfg, params, kAudio, f);
    CHECK(dec.shape() == Shape{4, 3, 2});
    CHECK(dec.values() == std::vector<double>(24, 0.0));

    params.heads[kAudio].pop_back();
    CHECK_THROWS_AS(decouple(cfg, params, kAudio, f), ShapeError);
}

TEST_CASE("decouple: identity and negation heads land in their slices") {
    // K=1, d1=d2=2: event head = identity, background head = negation.
    ModelConfig cfg;
    cfg.num_classes = 1;
    cfg.raw_dim_a = cfg.raw_dim_v = 2;
    cfg.d1 = cfg.d2 = 2;
    cfg.num_layers = 0;
    CafdParams params;
    params.heads[kAudio].push_back({identity_matrix(2), Tensor::zeros({2}, true)});
    params.heads[kAudio].push_back({identity_matrix(2, -1.0), Tensor::zeros({2}, true)});
    Tensor f = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    Tensor dec = decouple(cfg, params, kAudio, f);
    CHECK(dec.at({0, 0, 0}) == 1.0);
    CHECK(dec.at({0, 0, 1}) == 2.0);
    CHECK(dec.at({0, 1, 0}) == -1.0);
    CHECK(dec.at({0, 1, 1}) == -2.0);
    CHECK(dec.at({1, 0, 0}) == 3.0);
    CHECK(dec.at({1, 1, 1}) == -4.0);
}

TEST_CASE("decouple: heads with orthogonal row spaces give orthogonal slices") {
    // Event head projects onto e0, background head onto e1.
    ModelConfig cfg;
    cfg.num_classes = 1;
    cfg.raw_dim_a = cfg.raw_dim_v = 2;
    cfg.d1 = cfg.d2 = 2;
    cfg.num_layers = 0;
    CafdParams params;
    params.heads[kAudio].push_back(
        make_linear({2, 2}, {1, 0, 0, 0}, {0, 0}));  // -> (x0, 0)
    params.heads[kAudio].push_back(
        make_linear({2, 2}, {0, 0, 0, 1}, {0, 0}));  // -> (0, x1)
    Rng rng(9);
    Tensor f = Tensor::uniform({6, 2}, -2.0, 2.0, rng);
    Tensor dec = decouple(cfg, params, kAudio, f);
    for (index_t t = 0; t < 6; ++t) {
        const double dot = dec.at({t, 0, 0}) * dec.at({t, 1, 0}) +
                           dec.at({t, 0, 1}) * dec.at({t, 1, 1});
        CHECK(dot == 0.0);
    }
}

namespace {

// Full CAFD params (K=2, d1=3, d2=2) with configurable alpha bias.
CafdParams gated_params(const ModelConfig& cfg, double alpha_bias, Rng& rng) {
    CafdParams params;
    for (int m = 0; m < 2; ++m) {
        params.encoder[m] = {identity_matrix(3), Tensor::zeros({3}, true)};
        for (index_t k = 0; k < cfg.num_slices(); ++k)
            params.heads[m].push_back(
                {Tensor::uniform({3, 2}, -1.0, 1.0, rng, true),
                 Tensor::uniform({2}, -0.2, 0.2, rng, true)});
        params.alpha[m] = {Tensor::zeros({3, 1}, true),
                           Tensor::from_vector({1}, {alpha_bias}, true)};
        params.blend[m] = {Tensor::uniform({4, 2}, -1.0, 1.0, rng, true),
                           Tensor::zeros({2}, true)};
    }
    return params;
}

}  // namespace

TEST_CASE("fuse_background: saturated gates isolate one side") {
    ModelConfig cfg = tiny_config();
    Rng rng(17);
    Tensor f = Tensor::uniform({4, 3}, 0.1, 1.0, rng);

    // alpha ~ 1: changing the background head must not change the output.
    {
        Rng prng(100);
        CafdParams p1 = gated_params(cfg, 20.0, prng);
        CafdParams p2 = p1;
        p2.heads[kAudio].back() = zero_linear(3, 2);  // different background head
        Tensor d1 = decouple(cfg, p1, kAudio, f);
        Tensor d2 = decouple(cfg, p2, kAudio, f);
        Tensor h1 = fuse_background(cfg, p1, kAudio, d1, f).first;
        Tensor h2 = fuse_background(cfg, p2, kAudio, d2, f).first;
        CHECK(max_abs_diff_below(h1, h2, 1e-7));
    }
    // alpha ~ 0: changing the event heads must not change the output.
    {
        Rng prng(101);
        CafdParams p1 = gated_params(cfg, -20.0, prng);
        CafdParams p2 = p1;
        p2.heads[kVisual][0] = zero_linear(3, 2);
        p2.heads[kVisual][1] = zero_linear(3, 2);
        Tensor d1 = decouple(cfg, p1, kVisual, f);
        Tensor d2 = decouple(cfg, p2, kVisual, f);
        Tensor h1 = fuse_background(cfg, p1, kVisual, d1, f).first;
        Tensor h2 = fuse_background(cfg, p2, kVisual, d2, f).first;
        CHECK(max_abs_diff_below(h1, h2, 1e-7));
    }
}

TEST_CASE("fuse_background: hand-checked blend at alpha = 0.5") {
    // K=1, d2=2, W_h = [I; I] stacked, zero alpha params -> alpha = 0.5:
    // fused[t,0,:] = relu(0.5*event + 0.5*background).
    ModelConfig cfg;
    cfg.num_classes = 1;
    cfg.raw_dim_a = cfg.raw_dim_v = 2;
    cfg.d1 = cfg.d2 = 2;
    cfg.num_layers = 0;
    CafdParams params;
    params.encoder[kAudio] = {identity_matrix(2), Tensor::zeros({2}, true)};
    params.heads[kAudio].push_back({identity_matrix(2), Tensor::zeros({2}, true)});
    params.heads[kAudio].push_back(
        make_linear({2, 2}, {0, 1, 1, 0}, {0, 0}));  // swap coordinates
    params.alpha[kAudio] = zero_linear(2, 1);
    params.blend[kAudio] =
        make_linear({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1}, {0, 0});  // [I; I]

    Tensor f = Tensor::from_vector({1, 2}, {3.0, -1.0});
    Tensor dec = decouple(cfg, params, kAudio, f);
    auto [fused, alpha] = fuse_background(cfg, params, kAudio, dec, f);
    CHECK(alpha.at({0, 0}) == 0.5);
    // event = (3,-1), background = (-1,3): 0.5*e + 0.5*bg = (1,1).
    CHECK(fused.at({0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fused.at({0, 0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alpha stays strictly inside (0,1) and gates gradients") {
    ModelConfig cfg = tiny_config();
    Rng rng(23);
    CafdParams params = gated_params(cfg, 0.3, rng);
    Tensor f = Tensor::uniform({5, 3}, 0.1, 1.0, rng);
    Tensor dec = decouple(cfg, params, kAudio, f);
    auto [fused, alpha] = fuse_background(cfg, params, kAudio, dec, f);
    for (index_t t = 0; t < 5; ++t) {
        CHECK(alpha.at({t, 0}) > 0.0);
        CHECK(alpha.at({t, 0}) < 1.0);
    }
    // The gate is differentiable and used: its parameters get gradients.
    backward(ops::mean_all(fused));
    bool any = false;
    for (double g : params.alpha[kAudio].b.grad()) any = any || g != 0.0;
    CHECK(any);
}

TEST_CASE("no-bg ablation: event slices only, zero background slice") {
    ModelConfig cfg = tiny_config();
    cfg.background = false;
    CHECK(cfg.num_slices() == cfg.num_classes);
    ModelParams params = ModelParams::init(cfg, 11);
    CHECK_FALSE(params.cafd.alpha[kAudio].w.defined());
    CHECK(params.cafd.blend[kAudio].w.defined());
    Rng rng(12);
    Tensor raw = Tensor::uniform({4, 3}, -1.0, 1.0, rng);
    ForwardTrace trace = forward(cfg, params, raw, raw);
    CHECK(trace.fused[kAudio].shape() == Shape{4, 2, 2});
    CHECK_FALSE(trace.alpha[kAudio].defined());
}

TEST_CASE("no-cafd ablation: shared projection broadcast to all slots") {
    ModelConfig cfg = tiny_config();
    cfg.decouple = false;
    cfg.background = false;
    CHECK(cfg.num_slices() == 1);
    ModelParams params = ModelParams::init(cfg, 13);
    CHECK(params.cafd.heads[kAudio].size() == 1);
    CHECK_FALSE(params.cafd.blend[kAudio].w.defined());
    Rng rng(14);
    Tensor raw = Tensor::uniform({4, 3}, -1.0, 1.0, rng);
    ForwardTrace trace = forward(cfg, params, raw, raw);
    CHECK(trace.fused[kAudio].shape() == Shape{4, 2, 2});
    // Every class slot carries the same shared feature.
    for (index_t t = 0; t < 4; ++t)
        for (index_t d = 0; d < 2; ++d)
            CHECK(trace.fused[kAudio].at({t, 0, d}) ==
                  trace.fused[kAudio].at({t, 1, d}));
    // Background without decoupling is rejected.
    ModelConfig bad = tiny_config();
    bad.decouple = false;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("shape grid: decoupled and fused shapes track (T,K,d1,d2)") {
    for (index_t t : {1, 3}) {
        for (index_t k : {1, 4}) {
            for (index_t d2 : {2, 5}) {
                ModelConfig cfg;
                cfg.num_classes = k;
                cfg.raw_dim_a = 3;
                cfg.raw_dim_v = 4;
                cfg.d1 = 6;
                cfg.d2 = d2;
                cfg.num_layers = 0;
                ModelParams params = ModelParams::init(cfg, 5);
                Rng rng(6);
                Tensor ra = Tensor::uniform({t, 3}, -1.0, 1.0, rng);
                Tensor rv = Tensor::uniform({t, 4}, -1.0, 1.0, rng);
                ForwardTrace trace = forward(cfg, params, ra, rv);
                CHECK(trace.decoupled[kAudio].shape() == Shape{t, k + 1, d2});
                CHECK(trace.fused[kAudio].shape() == Shape{t, k, d2});
                CHECK(trace.seg_probs[kVisual].shape() == Shape{t, k});
                CHECK(trace.video_prob.shape() == Shape{1, k});
            }
        }
    }
}
