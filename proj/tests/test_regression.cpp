#include <doctest.h>

#include "mmcse/cafd.hpp"
#include "mmcse/fgse.hpp"
#include "mmcse/ops.hpp"

// Golden values recorded once from seed-fixed runs and frozen. Any numeric
// drift in the encoder or the layer stack shows up here first.

using namespace mmcse;

TEST_CASE("encoder golden fixture (seeds 321/654)") {
    ModelConfig cfg;
    cfg.num_classes = 2;
    cfg.raw_dim_a = 5;
    cfg.raw_dim_v = 4;
    cfg.d1 = 6;
    cfg.d2 = 3;
    cfg.num_layers = 0;
    ModelParams p = ModelParams::init(cfg, 321);
    Rng rng(654);
    Tensor ra = Tensor::uniform({3, 5}, -1.0, 1.0, rng);
    Tensor rv = Tensor::uniform({3, 4}, -1.0, 1.0, rng);
    auto f = encode_inputs(cfg, p.cafd, ra, rv);
    CHECK(f[kAudio].at({0, 0}) == 0.43073575704389577);
    CHECK(f[kAudio].at({1, 2}) == 0.36635875860754469);
    CHECK(f[kVisual].at({2, 1}) == 0.43217456445981872);
    CHECK(ops::sum_all(f[kAudio]).item() == 3.2581501571622207);
    CHECK(ops::sum_all(f[kVisual]).item() == 3.3353379121435571);
}

TEST_CASE("two-layer stack golden fixture (seeds 111/222)") {
    ModelConfig cfg;
    cfg.num_classes = 3;
    cfg.raw_dim_a = 4;
    cfg.raw_dim_v = 4;
    cfg.d1 = 5;
    cfg.d2 = 4;
    cfg.num_layers = 2;
    ModelParams p = ModelParams::init(cfg, 111);
    Rng rng(222);
    Tensor ha = Tensor::uniform({4, 3, 4}, -1.0, 1.0, rng);
    Tensor hv = Tensor::uniform({4, 3, 4}, -1.0, 1.0, rng);
    std::vector<CoocMap> maps;
    auto out = stack_forward(cfg, p, {ha, hv}, &maps);
    CHECK(out[kAudio].at({0, 0, 0}) == 4.027181521540931);
    CHECK(out[kAudio].at({1, 2, 3}) == -4.4349971294886075);
    CHECK(out[kVisual].at({3, 1, 1}) == 2.415582062202863);
    CHECK(ops::sum_all(out[kAudio]).item() == -27.176167504148196);
    CHECK(ops::sum_all(out[kVisual]).item() == 9.5323552954207695);
    REQUIRE(maps.size() == 8);
    CHECK(maps[0].beta.at({0, 0, 0}) == 0.32754842618462227);
}
