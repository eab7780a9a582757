#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmcse/tensor.hpp"

namespace mmcse {

inline constexpr int kAudio = 0;
inline constexpr int kVisual = 1;
inline const char* modality_tag(int m) { return m == kAudio ? "a" : "v"; }

enum class LgsfResidual { Hhat, Z };
enum class MmilMode { Joint, Factorized };
enum class OrtMode { Signed, Absolute };

struct ModelConfig {
    index_t num_classes = 0;  // K
    index_t raw_dim_a = 0;
    index_t raw_dim_v = 0;
    index_t d1 = 256;
    index_t d2 = 128;
    index_t num_layers = 4;

    // Ablation switches.
    bool decouple = true;    // off: one shared projection broadcast to all slots
    bool background = true;  // off: event slots only, blend sees a zero slice
    bool use_secm = true;
    bool use_lgsf = true;
    bool use_intra = true;
    bool use_cross = true;

    bool secm_projections = true;
    LgsfResidual lgsf_residual = LgsfResidual::Hhat;
    MmilMode mmil = MmilMode::Joint;
    OrtMode ort = OrtMode::Signed;

    // Decoupling head count: K+1, K without background, 1 without decoupling.
    index_t num_slices() const;
    void validate() const;
};

std::string to_json_string(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

struct LinearParams {
    Tensor w, b;
};

struct CafdParams {
    std::array<LinearParams, 2> encoder;             // raw_dim -> d1
    std::array<std::vector<LinearParams>, 2> heads;  // num_slices x (d1 -> d2)
    std::array<LinearParams, 2> alpha;               // d1 -> 1, gated mode only
    std::array<LinearParams, 2> blend;               // 2*d2 -> d2
};

// Bias-free attention projections, present iff secm_projections is on.
struct BranchParams {
    Tensor wq, wk, wv;
};

struct FgseLayerParams {
    std::array<BranchParams, 2> intra;
    std::array<BranchParams, 2> cross;
};

struct HeadParams {
    std::array<LinearParams, 2> parser;  // d2 -> 1, shared across classes
    std::array<LinearParams, 2> pool;    // d2 -> 1 attention scores
};

struct DecoderParams {
    std::array<LinearParams, 2> hidden;  // num_slices*d2 -> d1
    std::array<LinearParams, 2> out;     // d1 -> d1
};

struct ModelParams {
    CafdParams cafd;
    std::vector<FgseLayerParams> layers;
    HeadParams heads;
    DecoderParams decoder;

    // Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases, drawn
    // in enumeration order from the given seed.
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

    // Fixed enumeration order; drives the optimizer, checkpoints and the
    // gradient checker. Undefined (ablated-away) tensors are skipped.
    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<std::pair<std::string, const Tensor*>> named() const;
    void zero_grad();
};

// One cross- or intra-modal co-occurrence map from a SECM block.
struct CoocMap {
    Tensor beta;  // [T,K,K], rows sum to 1
    int src = 0;
    int dst = 0;
    int layer = 0;
};

// Every intermediate a loss or export needs from one forward pass.
struct ForwardTrace {
    std::array<Tensor, 2> holistic;     // F      [T,d1]
    std::array<Tensor, 2> decoupled;    // F~     [T,S,d2]
    std::array<Tensor, 2> alpha;        // [T,1] when the background gate runs
    std::array<Tensor, 2> fused;        // H^     [T,K,d2]
    std::vector<CoocMap> cooc;          // 4 per layer at full config
    std::array<Tensor, 2> final_feats;  // X_L    [T,K,d2]
    std::array<Tensor, 2> seg_probs;    // p      [T,K]
    Tensor video_prob;                  // P      [1,K]
};

ForwardTrace forward(const ModelConfig& cfg, const ModelParams& params,
                     const Tensor& raw_a, const Tensor& raw_v);

}  // namespace mmcse
