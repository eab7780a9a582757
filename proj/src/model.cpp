#include "mmcse/model.hpp"

#include <cmath>

#include <json.hpp>

#include "mmcse/cafd.hpp"
#include "mmcse/fgse.hpp"
#include "mmcse/heads.hpp"
#include "mmcse/ops.hpp"

namespace mmcse {

index_t ModelConfig::num_slices() const {
    if (!decouple) return 1;
    return background ? num_classes + 1 : num_classes;
}

void ModelConfig::validate() const {
    if (num_classes < 1)
        throw ValidationError("model config: num_classes must be >= 1");
    if (raw_dim_a < 1 || raw_dim_v < 1)
        throw ValidationError("model config: raw feature dims must be >= 1");
    if (d1 < 1 || d2 < 1) throw ValidationError("model config: d1/d2 must be >= 1");
    if (num_layers < 0)
        throw ValidationError("model config: num_layers must be >= 0");
    if (!use_intra && !use_cross)
        throw ValidationError(
            "model config: no-intra and no-cross leave an empty FGSE layer");
    if (!decouple && background)
        throw ValidationError(
            "model config: background class requires decoupling");
}

namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    return json{{"num_classes", c.num_classes},
                {"raw_dim_a", c.raw_dim_a},
                {"raw_dim_v", c.raw_dim_v},
                {"d1", c.d1},
                {"d2", c.d2},
                {"num_layers", c.num_layers},
                {"decouple", c.decouple},
                {"background", c.background},
                {"use_secm", c.use_secm},
                {"use_lgsf", c.use_lgsf},
                {"use_intra", c.use_intra},
                {"use_cross", c.use_cross},
                {"secm_projections", c.secm_projections},
                {"lgsf_residual",
                 c.lgsf_residual == LgsfResidual::Hhat ? "hhat" : "z"},
                {"mmil", c.mmil == MmilMode::Joint ? "joint" : "factorized"},
                {"ort", c.ort == OrtMode::Signed ? "signed" : "absolute"}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.num_classes = j.at("num_classes").get<index_t>();
    c.raw_dim_a = j.at("raw_dim_a").get<index_t>();
    c.raw_dim_v = j.at("raw_dim_v").get<index_t>();
    c.d1 = j.at("d1").get<index_t>();
    c.d2 = j.at("d2").get<index_t>();
    c.num_layers = j.at("num_layers").get<index_t>();
    c.decouple = j.at("decouple").get<bool>();
    c.background = j.at("background").get<bool>();
    c.use_secm = j.at("use_secm").get<bool>();
    c.use_lgsf = j.at("use_lgsf").get<bool>();
    c.use_intra = j.at("use_intra").get<bool>();
    c.use_cross = j.at("use_cross").get<bool>();
    c.secm_projections = j.at("secm_projections").get<bool>();
    c.lgsf_residual = j.at("lgsf_residual").get<std::string>() == "z"
                          ? LgsfResidual::Z
                          : LgsfResidual::Hhat;
    c.mmil = j.at("mmil").get<std::string>() == "factorized"
                 ? MmilMode::Factorized
                 : MmilMode::Joint;
    c.ort = j.at("ort").get<std::string>() == "absolute" ? OrtMode::Absolute
                                                         : OrtMode::Signed;
    return c;
}

Tensor init_weight(index_t fan_in, index_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform({fan_in, fan_out}, -bound, bound, rng, true);
}

LinearParams init_linear(index_t fan_in, index_t fan_out, Rng& rng) {
    return {init_weight(fan_in, fan_out, rng), Tensor::zeros({fan_out}, true)};
}

BranchParams init_branch(index_t d2, Rng& rng) {
    return {init_weight(d2, d2, rng), init_weight(d2, d2, rng),
            init_weight(d2, d2, rng)};
}

bool branch_params_present(const ModelConfig& cfg) {
    return cfg.secm_projections && cfg.use_secm && cfg.num_layers > 0;
}

template <typename Self, typename Out>
void enumerate(Self& self, Out& out) {
    auto push = [&out](const std::string& name, auto& t) {
        if (t.defined()) out.emplace_back(name, &t);
    };
    auto push_linear = [&push](const std::string& name, auto& lin) {
        push(name + ".weight", lin.w);
        push(name + ".bias", lin.b);
    };
    for (int m = 0; m < 2; ++m)
        push_linear(std::string("cafd.encoder.") + modality_tag(m),
                    self.cafd.encoder[m]);
    for (int m = 0; m < 2; ++m) {
        for (std::size_t k = 0; k < self.cafd.heads[m].size(); ++k) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%02zu", k);
            push_linear(std::string("cafd.head") + buf + "." + modality_tag(m),
                        self.cafd.heads[m][k]);
        }
    }
    for (int m = 0; m < 2; ++m)
        push_linear(std::string("cafd.alpha.") + modality_tag(m),
                    self.cafd.alpha[m]);
    for (int m = 0; m < 2; ++m)
        push_linear(std::string("cafd.blend.") + modality_tag(m),
                    self.cafd.blend[m]);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
        for (const char* branch : {"intra", "cross"}) {
            for (int m = 0; m < 2; ++m) {
                auto& bp = branch == std::string("intra") ? self.layers[l].intra[m]
                                                          : self.layers[l].cross[m];
                const std::string base = "fgse.layer" + std::to_string(l) + "." +
                                         branch + "." + modality_tag(m);
                push(base + ".wq", bp.wq);
                push(base + ".wk", bp.wk);
                push(base + ".wv", bp.wv);
            }
        }
    }
    for (int m = 0; m < 2; ++m)
        push_linear(std::string("heads.parser.") + modality_tag(m),
                    self.heads.parser[m]);
    for (int m = 0; m < 2; ++m)
        push_linear(std::string("heads.pool.") + modality_tag(m),
                    self.heads.pool[m]);
    for (int m = 0; m < 2; ++m) {
        push_linear(std::string("decoder.hidden.") + modality_tag(m),
                    self.decoder.hidden[m]);
        push_linear(std::string("decoder.out.") + modality_tag(m),
                    self.decoder.out[m]);
    }
}

}  // namespace

std::string to_json_string(const ModelConfig& cfg) {
    return config_to_json(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
    return config_from_json(json::parse(text));
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;
    const std::array<index_t, 2> raw_dims = {cfg.raw_dim_a, cfg.raw_dim_v};
    for (int m = 0; m < 2; ++m)
        p.cafd.encoder[m] = init_linear(raw_dims[m], cfg.d1, rng);
    for (int m = 0; m < 2; ++m) {
        p.cafd.heads[m].resize(static_cast<std::size_t>(cfg.num_slices()));
        for (auto& head : p.cafd.heads[m]) head = init_linear(cfg.d1, cfg.d2, rng);
    }
    if (cfg.decouple && cfg.background) {
        for (int m = 0; m < 2; ++m) p.cafd.alpha[m] = init_linear(cfg.d1, 1, rng);
    }
    if (cfg.decouple) {
        for (int m = 0; m < 2; ++m)
            p.cafd.blend[m] = init_linear(2 * cfg.d2, cfg.d2, rng);
    }
    p.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    if (branch_params_present(cfg)) {
        for (auto& layer : p.layers) {
            if (cfg.use_intra)
                for (int m = 0; m < 2; ++m) layer.intra[m] = init_branch(cfg.d2, rng);
            if (cfg.use_cross)
                for (int m = 0; m < 2; ++m) layer.cross[m] = init_branch(cfg.d2, rng);
        }
    }
    for (int m = 0; m < 2; ++m) p.heads.parser[m] = init_linear(cfg.d2, 1, rng);
    for (int m = 0; m < 2; ++m) p.heads.pool[m] = init_linear(cfg.d2, 1, rng);
    for (int m = 0; m < 2; ++m) {
        p.decoder.hidden[m] = init_linear(cfg.num_slices() * cfg.d2, cfg.d1, rng);
        p.decoder.out[m] = init_linear(cfg.d1, cfg.d1, rng);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    enumerate(*this, out);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    enumerate(*this, out);
    return out;
}

void ModelParams::zero_grad() {
    for (auto& [name, t] : named()) t->zero_grad();
}

ForwardTrace forward(const ModelConfig& cfg, const ModelParams& params,
                     const Tensor& raw_a, const Tensor& raw_v) {
    ForwardTrace trace;
    trace.holistic = encode_inputs(cfg, params.cafd, raw_a, raw_v);
    for (int m = 0; m < 2; ++m) {
        trace.decoupled[m] = decouple(cfg, params.cafd, m, trace.holistic[m]);
        auto [fused, alpha] =
            fuse_background(cfg, params.cafd, m, trace.decoupled[m], trace.holistic[m]);
        trace.fused[m] = fused;
        trace.alpha[m] = alpha;
    }
    trace.final_feats = stack_forward(cfg, params, trace.fused, &trace.cooc);
    for (int m = 0; m < 2; ++m)
        trace.seg_probs[m] = parse_events(params.heads.parser[m], trace.final_feats[m]);
    trace.video_prob = mmil_pool(cfg, params.heads, trace.final_feats, trace.seg_probs);
    return trace;
}

}  // namespace mmcse
