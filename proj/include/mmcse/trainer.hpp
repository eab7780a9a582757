#pragma once

#include <filesystem>
#include <vector>

#include "mmcse/dataio.hpp"
#include "mmcse/gradcheck.hpp"
#include "mmcse/losses.hpp"
#include "mmcse/metrics.hpp"
#include "mmcse/model.hpp"

namespace mmcse {

// Builds a seeded random model plus one synthetic sample and runs the
// central-difference checker on the full training objective over every
// named parameter.
GradCheckReport grad_check_model(const ModelConfig& cfg, index_t num_segments,
                                 std::uint64_t seed, double step = 1e-5);

struct TrainConfig {
    index_t epochs = 60;
    index_t batch_size = 64;
    double lr = 3e-4;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossWeights losses;
    ModelConfig model;  // num_classes / raw dims of 0 are filled from the data
    std::uint64_t seed = 1;

    void validate() const;
};

// Decoupled-weight-decay adaptive gradient descent. State is keyed by the
// parameter order of the first step; later steps must pass the same list.
class AdamW {
   public:
    AdamW(double lr, double weight_decay, double beta1, double beta2, double eps);

    // theta -= lr * (mhat / (sqrt(vhat) + eps) + wd * theta).
    // Fails fast on any non-finite gradient.
    void step(const std::vector<std::pair<std::string, Tensor*>>& params);
    index_t step_count() const { return t_; }

   private:
    double lr_, wd_, beta1_, beta2_, eps_;
    index_t t_ = 0;
    double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
    std::vector<std::vector<double>> m_, v_;
};

struct StepRecord {
    index_t epoch = 0;
    index_t step = 0;  // global step, 1-based
    double basic = 0, rec = 0, ort = 0, ec = 0, total = 0;
};

struct TrainResult {
    ModelConfig model;
    ModelParams params;
    std::vector<StepRecord> log;
};

// Deterministic mini-batch training: seeded shuffle per epoch, batch loss =
// mean of per-sample losses, one AdamW step per batch. With a non-empty
// out_dir, writes log.jsonl, the resolved config, and one checkpoint
// directory per epoch. A non-finite loss aborts, naming the first bad op.
TrainResult train(const dataio::Dataset& ds, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {});

// Forward passes without gradient recording, then the AVVP metric protocol.
metrics::MetricReport evaluate_model(const ModelConfig& cfg,
                                     const ModelParams& params,
                                     const dataio::Dataset& ds,
                                     double threshold = 0.5);

// Checkpoint: manifest.json (config echo, seed, step counter, tensor table)
// plus one MMCT file per named parameter.
void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& cfg,
                     const ModelParams& params, std::uint64_t seed,
                     index_t step);
struct Checkpoint {
    ModelConfig model;
    ModelParams params;
    std::uint64_t seed = 0;
    index_t step = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mmcse
