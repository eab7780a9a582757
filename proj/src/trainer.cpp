#include "mmcse/trainer.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmcse/ops.hpp"

namespace mmcse {

namespace {

using nlohmann::json;

// Streams the shuffle independently of parameter initialization.
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ull;

json record_to_json(const StepRecord& r) {
    return json{{"epoch", r.epoch}, {"step", r.step},   {"basic", r.basic},
                {"rec", r.rec},     {"ort", r.ort},     {"ec", r.ec},
                {"total", r.total}};
}

}  // namespace

GradCheckReport grad_check_model(const ModelConfig& cfg, index_t num_segments,
                                 std::uint64_t seed, double step) {
    cfg.validate();
    if (num_segments < 1)
        throw ValidationError("grad_check_model: need at least one segment");
    ModelParams params = ModelParams::init(cfg, seed);
    Rng rng(seed ^ 0xC2B2AE3D27D4EB4Full);
    const Tensor raw_a =
        Tensor::uniform({num_segments, cfg.raw_dim_a}, -1.0, 1.0, rng);
    const Tensor raw_v =
        Tensor::uniform({num_segments, cfg.raw_dim_v}, -1.0, 1.0, rng);
    Annotations ann;
    {
        std::vector<double> sa(static_cast<std::size_t>(num_segments * cfg.num_classes));
        std::vector<double> sv(sa.size());
        std::vector<double> video(static_cast<std::size_t>(cfg.num_classes), 0.0);
        for (std::size_t i = 0; i < sa.size(); ++i) {
            sa[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
            sv[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
            if (sa[i] == 1.0 || sv[i] == 1.0)
                video[i % static_cast<std::size_t>(cfg.num_classes)] = 1.0;
        }
        ann.seg_a = Tensor::from_vector({num_segments, cfg.num_classes}, sa);
        ann.seg_v = Tensor::from_vector({num_segments, cfg.num_classes}, sv);
        ann.video = Tensor::from_vector({1, cfg.num_classes}, video);
    }
    LossWeights weights;  // all four terms on at their default weights
    std::vector<NamedLeaf> leaves;
    for (auto& [name, t] : params.named()) leaves.push_back({name, *t});
    return grad_check(
        [&] {
            ForwardTrace trace = forward(cfg, params, raw_a, raw_v);
            return total_loss(cfg, params, trace, ann, weights).total;
        },
        leaves, step);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (batch_size < 1)
        throw ValidationError("train config: batch_size must be >= 1");
    if (lr <= 0.0) throw ValidationError("train config: lr must be positive");
    if (weight_decay < 0.0)
        throw ValidationError("train config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("train config: betas must lie in [0,1)");
    if (eps <= 0.0) throw ValidationError("train config: eps must be positive");
}

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2,
             double eps)
    : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(const std::vector<std::pair<std::string, Tensor*>>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(static_cast<std::size_t>(params[i].second->numel()), 0.0);
            v_[i].assign(static_cast<std::size_t>(params[i].second->numel()), 0.0);
        }
    }
    if (m_.size() != params.size())
        throw ValidationError("adamw: parameter list changed between steps");
    ++t_;
    beta1_pow_ *= beta1_;
    beta2_pow_ *= beta2_;
    const double bc1 = 1.0 - beta1_pow_;
    const double bc2 = 1.0 - beta2_pow_;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& t = *params[pi].second;
        if (!t.has_grad())
            throw ValidationError("adamw: parameter '" + params[pi].first +
                                  "' has no gradient buffer");
        const double* g = t.grad_data();
        double* theta = t.mutable_data();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        const index_t n = t.numel();
        for (index_t i = 0; i < n; ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("adamw: non-finite gradient in '" +
                                   params[pi].first + "'");
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * theta[i]);
        }
    }
}

namespace {

struct BatchLoss {
    LossBundle bundle;
};

// Mean of per-sample components over the batch, then the weighted total, so
// the logged decomposition holds by construction.
LossBundle batch_loss(const ModelConfig& model_cfg, const ModelParams& params,
                      const dataio::Dataset& ds,
                      const std::vector<index_t>& batch,
                      const LossWeights& weights) {
    Tensor basic, rec, ort, ec;
    auto accumulate = [](Tensor& acc, const Tensor& term) {
        acc = acc.defined() ? ops::add(acc, term) : term;
    };
    for (index_t idx : batch) {
        const dataio::VideoSample& v = ds.videos[static_cast<std::size_t>(idx)];
        ForwardTrace trace = forward(model_cfg, params, v.raw_a, v.raw_v);
        LossBundle sample = total_loss(model_cfg, params, trace, v.ann, weights);
        accumulate(basic, sample.basic);
        accumulate(rec, sample.rec);
        accumulate(ort, sample.ort);
        accumulate(ec, sample.ec);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    LossBundle out;
    out.basic = ops::scale(basic, inv);
    out.rec = ops::scale(rec, inv);
    out.ort = ops::scale(ort, inv);
    out.ec = ops::scale(ec, inv);
    out.total = combine_total(out.basic, out.rec, out.ort, out.ec, weights);
    return out;
}

ModelConfig resolve_model_config(const dataio::Dataset& ds, ModelConfig cfg) {
    if (cfg.num_classes == 0) cfg.num_classes = ds.K;
    if (cfg.raw_dim_a == 0) cfg.raw_dim_a = ds.D_a;
    if (cfg.raw_dim_v == 0) cfg.raw_dim_v = ds.D_v;
    if (cfg.num_classes != ds.K)
        throw ValidationError("train: model has " +
                              std::to_string(cfg.num_classes) +
                              " classes but the dataset has " +
                              std::to_string(ds.K));
    if (cfg.raw_dim_a != ds.D_a || cfg.raw_dim_v != ds.D_v)
        throw ValidationError("train: model raw dims do not match the dataset");
    cfg.validate();
    return cfg;
}

}  // namespace

TrainResult train(const dataio::Dataset& ds, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
    ds.validate();
    cfg.validate();
    if (cfg.batch_size > static_cast<index_t>(ds.videos.size()))
        throw ValidationError("train: batch_size " +
                              std::to_string(cfg.batch_size) +
                              " exceeds dataset size " +
                              std::to_string(ds.videos.size()));

    TrainResult result;
    result.model = resolve_model_config(ds, cfg.model);
    result.params = ModelParams::init(result.model, cfg.seed);

    const bool emit = !out_dir.empty();
    std::ofstream log_stream;
    if (emit) {
        std::filesystem::create_directories(out_dir);
        log_stream.open(out_dir / "log.jsonl", std::ios::trunc);
        if (!log_stream) throw IoError("train: cannot open log.jsonl");
        std::ofstream cfg_out(out_dir / "model_config.json", std::ios::trunc);
        cfg_out << to_json_string(result.model) << "\n";
    }

    AdamW opt(cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps);
    Rng shuffle_rng(cfg.seed ^ kShuffleSalt);
    auto named = result.params.named();

    const index_t n = static_cast<index_t>(ds.videos.size());
    std::vector<index_t> order(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    index_t global_step = 0;
    for (index_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (index_t i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(shuffle_rng.range(0, i))]);
        for (index_t lo = 0; lo < n; lo += cfg.batch_size) {
            const index_t hi = std::min(n, lo + cfg.batch_size);
            const std::vector<index_t> batch(order.begin() + lo, order.begin() + hi);
            result.params.zero_grad();
            LossBundle loss =
                batch_loss(result.model, result.params, ds, batch, cfg.losses);
            if (!std::isfinite(loss.total.item())) {
                const auto bad = first_nonfinite_op(loss.total);
                throw NumericError(
                    "train: non-finite loss at step " +
                    std::to_string(global_step + 1) + "; first bad op: " +
                    (bad ? *bad : std::string("<input>")));
            }
            backward(loss.total);
            opt.step(named);
            ++global_step;
            StepRecord rec{epoch,
                           global_step,
                           loss.basic.item(),
                           loss.rec.item(),
                           loss.ort.item(),
                           loss.ec.item(),
                           loss.total.item()};
            result.log.push_back(rec);
            if (emit) log_stream << record_to_json(rec).dump() << "\n";
        }
        if (emit) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "epoch-%04lld",
                          static_cast<long long>(epoch));
            save_checkpoint(out_dir / "checkpoints" / buf, result.model,
                            result.params, cfg.seed, global_step);
        }
    }
    return result;
}

metrics::MetricReport evaluate_model(const ModelConfig& cfg,
                                     const ModelParams& params,
                                     const dataio::Dataset& ds,
                                     double threshold) {
    ds.validate();
    if (cfg.num_classes != ds.K)
        throw ValidationError("evaluate: checkpoint has " +
                              std::to_string(cfg.num_classes) +
                              " classes but the dataset has " +
                              std::to_string(ds.K));
    if (cfg.raw_dim_a != ds.D_a || cfg.raw_dim_v != ds.D_v)
        throw ValidationError("evaluate: checkpoint raw dims do not match the dataset");
    NoGradGuard ng;
    std::vector<metrics::VideoPrediction> preds;
    std::vector<Annotations> anns;
    preds.reserve(ds.videos.size());
    for (const dataio::VideoSample& v : ds.videos) {
        ForwardTrace trace = forward(cfg, params, v.raw_a, v.raw_v);
        preds.push_back({trace.seg_probs[kAudio], trace.seg_probs[kVisual]});
        anns.push_back(v.ann);
    }
    return metrics::evaluate(preds, anns, threshold);
}

void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& cfg,
                     const ModelParams& params, std::uint64_t seed,
                     index_t step) {
    std::filesystem::create_directories(dir);
    json tensors = json::array();
    for (const auto& [name, t] : params.named()) {
        const std::string file = name + ".mmct";
        dataio::write_tensor(dir / file, *t);
        tensors.push_back(json{{"name", name}, {"file", file}, {"shape", t->shape()}});
    }
    json manifest{{"format", "mmcse-checkpoint"},
                  {"version", 1},
                  {"seed", seed},
                  {"step", step},
                  {"config", json::parse(to_json_string(cfg))},
                  {"tensors", std::move(tensors)}};
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("save_checkpoint: cannot write manifest");
    os << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is)
        throw IoError("load_checkpoint: missing manifest.json in " + dir.string());
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw ValidationError("load_checkpoint: malformed manifest: " +
                              std::string(e.what()));
    }
    Checkpoint ckpt;
    try {
        ckpt.model = model_config_from_json(manifest.at("config").dump());
        ckpt.seed = manifest.at("seed").get<std::uint64_t>();
        ckpt.step = manifest.at("step").get<index_t>();
        ckpt.params = ModelParams::init(ckpt.model, ckpt.seed);
        auto named = ckpt.params.named();
        const auto& tensors = manifest.at("tensors");
        if (tensors.size() != named.size())
            throw ValidationError("load_checkpoint: manifest lists " +
                                  std::to_string(tensors.size()) +
                                  " tensors, model has " +
                                  std::to_string(named.size()));
        for (std::size_t i = 0; i < named.size(); ++i) {
            const auto& entry = tensors.at(i);
            if (entry.at("name").get<std::string>() != named[i].first)
                throw ValidationError("load_checkpoint: tensor order mismatch at '" +
                                      named[i].first + "'");
            Tensor loaded =
                dataio::read_tensor(dir / entry.at("file").get<std::string>());
            if (loaded.shape() != named[i].second->shape())
                throw ValidationError("load_checkpoint: '" + named[i].first +
                                      "' has shape " + shape_str(loaded.shape()) +
                                      ", expected " +
                                      shape_str(named[i].second->shape()));
            std::copy(loaded.data(), loaded.data() + loaded.numel(),
                      named[i].second->mutable_data());
        }
    } catch (const json::exception& e) {
        throw ValidationError("load_checkpoint: malformed manifest field: " +
                              std::string(e.what()));
    }
    return ckpt;
}

}  // namespace mmcse
