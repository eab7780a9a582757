// Command-line front end: synthetic data generation, training, evaluation,
// gradient verification, and exports.
//
// Exit codes: 0 success, 1 usage error, 2 validation/configuration error,
// 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmcse/cafd.hpp"
#include "mmcse/dataio.hpp"
#include "mmcse/kernels.hpp"
#include "mmcse/ops.hpp"
#include "mmcse/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmcse;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, delim)) out.push_back(item);
    return out;
}

long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("cannot parse integer '" + s + "' in " + what);
    }
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("cannot parse number '" + s + "' in " + what);
    }
}

// ---------------- gen-data ----------------

struct GenDataArgs {
    std::string out;
    dataio::SynthConfig cfg;
    std::string dims = "64,64";
    std::string events = "1:2";
    std::string presence = "0.25:0.25:0.5";
    std::vector<std::string> cooc;
};

void resolve_gen_args(GenDataArgs& a) {
    const auto d = split(a.dims, ',');
    if (d.size() != 2) throw UsageError("--dims wants Da,Dv");
    a.cfg.D_a = parse_int(d[0], "--dims");
    a.cfg.D_v = parse_int(d[1], "--dims");
    const auto e = split(a.events, ':');
    if (e.size() != 2) throw UsageError("--events wants LO:HI");
    a.cfg.events_min = parse_int(e[0], "--events");
    a.cfg.events_max = parse_int(e[1], "--events");
    const auto p = split(a.presence, ':');
    if (p.size() != 3) throw UsageError("--presence wants AUDIO:VISUAL:BOTH");
    a.cfg.p_audio_only = parse_double(p[0], "--presence");
    a.cfg.p_visual_only = parse_double(p[1], "--presence");
    a.cfg.p_both = parse_double(p[2], "--presence");
    a.cfg.cooc.clear();
    for (const std::string& s : a.cooc) {
        const auto parts = split(s, ':');
        if (parts.size() != 3) throw UsageError("--cooc wants I:J:PROB");
        dataio::CoocPair pair;
        pair.lead = parse_int(parts[0], "--cooc");
        pair.follow = parse_int(parts[1], "--cooc");
        pair.prob = parse_double(parts[2], "--cooc");
        if (pair.lead < 0 || pair.lead >= a.cfg.K || pair.follow < 0 ||
            pair.follow >= a.cfg.K || pair.lead == pair.follow)
            throw UsageError("--cooc pair " + s + " out of range for --classes " +
                             std::to_string(a.cfg.K));
        a.cfg.cooc.push_back(pair);
    }
}

json synth_config_json(const dataio::SynthConfig& c) {
    json pairs = json::array();
    for (const auto& p : c.cooc)
        pairs.push_back({{"lead", p.lead}, {"follow", p.follow}, {"prob", p.prob}});
    return json{{"num_videos", c.num_videos},
                {"segments", c.T},
                {"classes", c.K},
                {"d_a", c.D_a},
                {"d_v", c.D_v},
                {"events_min", c.events_min},
                {"events_max", c.events_max},
                {"p_audio_only", c.p_audio_only},
                {"p_visual_only", c.p_visual_only},
                {"p_both", c.p_both},
                {"p_background_segment", c.p_background_segment},
                {"cooc", pairs},
                {"noise_sigma", c.noise_sigma},
                {"seed", c.seed}};
}

int run_gen_data(GenDataArgs& a) {
    resolve_gen_args(a);
    std::cout << "resolved config:\n" << synth_config_json(a.cfg).dump(2) << "\n";
    dataio::Dataset ds = dataio::generate(a.cfg);
    dataio::save_dataset(ds, a.out);
    std::cout << "wrote " << ds.videos.size() << " videos to " << a.out << "\n";
    return 0;
}

// ---------------- train ----------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_file;
    TrainConfig cfg;
    std::string losses = "basic,rec,ort,ec";
    std::vector<std::string> ablate;
    std::string lgsf_residual = "hhat";
    std::string mmil = "joint";
    std::string ort = "signed";
    bool secm_projections = true;
};

// key = value lines, '#' comments, optional [section] headers (ignored).
// A key only applies when the matching flag was absent on the command line,
// so precedence is flags > file > defaults.
void apply_train_config_file(TrainArgs& a, const CLI::App* cmd) {
    std::ifstream is(a.config_file);
    if (!is) throw UsageError("--config: cannot read " + a.config_file);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string text;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) text += c;
        }
        if (text.empty() || text.front() == '[') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw UsageError("--config: line " + std::to_string(lineno) +
                             " is not key=value");
        const std::string key = text.substr(0, eq);
        const std::string value = text.substr(eq + 1);
        const std::string flag = "--" + key;
        if (cmd->count(flag) > 0) continue;  // command line wins
        if (key == "epochs")
            a.cfg.epochs = parse_int(value, flag);
        else if (key == "batch")
            a.cfg.batch_size = parse_int(value, flag);
        else if (key == "lr")
            a.cfg.lr = parse_double(value, flag);
        else if (key == "wd")
            a.cfg.weight_decay = parse_double(value, flag);
        else if (key == "lambda1")
            a.cfg.losses.lambda1 = parse_double(value, flag);
        else if (key == "lambda2")
            a.cfg.losses.lambda2 = parse_double(value, flag);
        else if (key == "losses")
            a.losses = value;
        else if (key == "ablate")
            a.ablate = split(value, ',');
        else if (key == "seed")
            a.cfg.seed = static_cast<std::uint64_t>(parse_int(value, flag));
        else if (key == "d1")
            a.cfg.model.d1 = parse_int(value, flag);
        else if (key == "d2")
            a.cfg.model.d2 = parse_int(value, flag);
        else if (key == "layers")
            a.cfg.model.num_layers = parse_int(value, flag);
        else if (key == "secm-projections")
            a.secm_projections = value == "true" || value == "1" || value == "on";
        else if (key == "lgsf-residual")
            a.lgsf_residual = value;
        else if (key == "mmil")
            a.mmil = value;
        else if (key == "ort")
            a.ort = value;
        else
            throw UsageError("--config: unknown key '" + key + "' on line " +
                             std::to_string(lineno));
    }
}

void resolve_train_args(TrainArgs& a) {
    LossWeights w = a.cfg.losses;
    w.use_basic = w.use_rec = w.use_ort = w.use_ec = false;
    for (const std::string& name : split(a.losses, ',')) {
        if (name == "basic")
            w.use_basic = true;
        else if (name == "rec")
            w.use_rec = true;
        else if (name == "ort")
            w.use_ort = true;
        else if (name == "ec")
            w.use_ec = true;
        else
            throw UsageError("--losses: unknown loss '" + name + "'");
    }
    if (!w.use_basic && !w.use_rec && !w.use_ort && !w.use_ec)
        throw UsageError("--losses: empty loss set");
    a.cfg.losses = w;

    for (const std::string& mode : a.ablate) {
        if (mode == "no-cafd") {
            a.cfg.model.decouple = false;
            a.cfg.model.background = false;
        } else if (mode == "no-bg") {
            a.cfg.model.background = false;
        } else if (mode == "no-secm") {
            a.cfg.model.use_secm = false;
        } else if (mode == "no-lgsf") {
            a.cfg.model.use_lgsf = false;
        } else if (mode == "no-intra") {
            a.cfg.model.use_intra = false;
        } else if (mode == "no-cross") {
            a.cfg.model.use_cross = false;
        } else {
            throw UsageError("--ablate: unknown mode '" + mode + "'");
        }
    }
    if (!a.cfg.model.use_intra && !a.cfg.model.use_cross)
        throw UsageError("--ablate no-intra with no-cross leaves an empty FGSE layer");

    a.cfg.model.secm_projections = a.secm_projections;
    if (a.lgsf_residual == "hhat")
        a.cfg.model.lgsf_residual = LgsfResidual::Hhat;
    else if (a.lgsf_residual == "z")
        a.cfg.model.lgsf_residual = LgsfResidual::Z;
    else
        throw UsageError("--lgsf-residual wants hhat|z");
    if (a.mmil == "joint")
        a.cfg.model.mmil = MmilMode::Joint;
    else if (a.mmil == "factorized")
        a.cfg.model.mmil = MmilMode::Factorized;
    else
        throw UsageError("--mmil wants joint|factorized");
    if (a.ort == "signed")
        a.cfg.model.ort = OrtMode::Signed;
    else if (a.ort == "absolute")
        a.cfg.model.ort = OrtMode::Absolute;
    else
        throw UsageError("--ort wants signed|absolute");
}

json train_config_json(const TrainArgs& a) {
    return json{{"data", a.data},
                {"out", a.out},
                {"epochs", a.cfg.epochs},
                {"batch_size", a.cfg.batch_size},
                {"lr", a.cfg.lr},
                {"weight_decay", a.cfg.weight_decay},
                {"beta1", a.cfg.beta1},
                {"beta2", a.cfg.beta2},
                {"eps", a.cfg.eps},
                {"lambda1", a.cfg.losses.lambda1},
                {"lambda2", a.cfg.losses.lambda2},
                {"losses",
                 {{"basic", a.cfg.losses.use_basic},
                  {"rec", a.cfg.losses.use_rec},
                  {"ort", a.cfg.losses.use_ort},
                  {"ec", a.cfg.losses.use_ec}}},
                {"seed", a.cfg.seed},
                {"model", json::parse(to_json_string(a.cfg.model))}};
}

int run_train(TrainArgs& a) {
    resolve_train_args(a);
    dataio::Dataset ds = dataio::load_dataset(a.data);
    // The library insists on batch_size <= dataset size; small fixtures with
    // default flags just train full-batch.
    if (a.cfg.batch_size > static_cast<index_t>(ds.videos.size())) {
        a.cfg.batch_size = static_cast<index_t>(ds.videos.size());
        std::cout << "note: batch size clamped to the dataset size ("
                  << a.cfg.batch_size << ")\n";
    }
    // Echo the fully resolved configuration before the first step.
    ModelConfig probe = a.cfg.model;
    if (probe.num_classes == 0) probe.num_classes = ds.K;
    if (probe.raw_dim_a == 0) probe.raw_dim_a = ds.D_a;
    if (probe.raw_dim_v == 0) probe.raw_dim_v = ds.D_v;
    TrainArgs echo = a;
    echo.cfg.model = probe;
    const json resolved = train_config_json(echo);
    std::cout << "resolved config:\n" << resolved.dump(2) << "\n";
    fs::create_directories(a.out);
    std::ofstream cfg_out(fs::path(a.out) / "train_config.json", std::ios::trunc);
    cfg_out << resolved.dump(2) << "\n";
    cfg_out.close();

    TrainResult result = train(ds, a.cfg, a.out);
    const StepRecord& last = result.log.back();
    std::printf("done: %lld steps, final total %.6f (basic %.6f rec %.6f ort %.6f ec %.6f)\n",
                static_cast<long long>(last.step), last.total, last.basic,
                last.rec, last.ort, last.ec);
    std::cout << "checkpoints under " << (fs::path(a.out) / "checkpoints").string()
              << "\n";
    return 0;
}

// ---------------- eval ----------------

struct EvalArgs {
    std::string ckpt;
    std::string data;
    double threshold = 0.5;
    std::string report = "text";
    std::string out;
};

int run_eval(EvalArgs& a) {
    if (!(a.threshold > 0.0 && a.threshold < 1.0))
        throw UsageError("--threshold must lie in (0,1)");
    std::cout << "resolved config:\n"
              << json{{"ckpt", a.ckpt},
                      {"data", a.data},
                      {"threshold", a.threshold},
                      {"report", a.report}}
                     .dump(2)
              << "\n";
    Checkpoint ckpt = load_checkpoint(a.ckpt);
    dataio::Dataset ds = dataio::load_dataset(a.data);
    metrics::MetricReport report = evaluate_model(ckpt.model, ckpt.params, ds, a.threshold);
    const std::string text = a.report == "machine"
                                 ? report.to_json_string(a.threshold) + "\n"
                                 : report.to_text(a.threshold);
    if (a.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream os(a.out, std::ios::trunc);
        if (!os) throw IoError("cannot write report to " + a.out);
        os << text;
        std::cout << "wrote report to " << a.out << "\n";
    }
    return 0;
}

// ---------------- grad-check ----------------

struct GradCheckArgs {
    std::uint64_t seed = 2024;
    index_t t = 3, k = 4, d1 = 8, d2 = 6, layers = 2;
    index_t da = 10, dv = 12;
    double step = 1e-5;
    double tolerance = 1e-6;
};

int run_grad_check(const GradCheckArgs& a) {
    ModelConfig cfg;
    cfg.num_classes = a.k;
    cfg.raw_dim_a = a.da;
    cfg.raw_dim_v = a.dv;
    cfg.d1 = a.d1;
    cfg.d2 = a.d2;
    cfg.num_layers = a.layers;
    std::cout << "resolved config:\n"
              << json{{"seed", a.seed}, {"t", a.t},       {"k", a.k},
                      {"d1", a.d1},     {"d2", a.d2},     {"layers", a.layers},
                      {"da", a.da},     {"dv", a.dv},     {"step", a.step},
                      {"tolerance", a.tolerance}}
                     .dump(2)
              << "\n";
    const GradCheckReport report = grad_check_model(cfg, a.t, a.seed, a.step);
    std::printf("max relative error: %.3e (worst: %s[%lld], analytic %.9e, fd %.9e)\n",
                report.max_rel_error, report.worst_leaf.c_str(),
                static_cast<long long>(report.worst_index), report.analytic,
                report.numeric);
    if (report.max_rel_error > a.tolerance) {
        std::fprintf(stderr, "gradient check FAILED tolerance %.1e\n", a.tolerance);
        return 3;
    }
    std::printf("gradient check passed at tolerance %.1e\n", a.tolerance);
    return 0;
}

// ---------------- exports ----------------

struct ExportArgs {
    std::string ckpt;
    std::string data;
    std::string out;
};

int run_export_cooc(const ExportArgs& a) {
    std::cout << "resolved config:\n"
              << json{{"ckpt", a.ckpt}, {"data", a.data}, {"out", a.out}}.dump(2)
              << "\n";
    Checkpoint ckpt = load_checkpoint(a.ckpt);
    dataio::Dataset ds = dataio::load_dataset(a.data);
    if (ckpt.model.num_classes != ds.K)
        throw ValidationError("export-cooc: checkpoint/dataset class mismatch");
    if (!ckpt.model.use_secm || ckpt.model.num_layers == 0 || !ckpt.model.use_cross)
        throw ValidationError(
            "export-cooc: this configuration records no cross-modal maps");
    NoGradGuard ng;
    const index_t k = ds.K;
    std::vector<double> acc(static_cast<std::size_t>(k * k), 0.0);
    index_t rows = 0;
    const int last_layer = static_cast<int>(ckpt.model.num_layers) - 1;
    for (const auto& video : ds.videos) {
        ForwardTrace trace = forward(ckpt.model, ckpt.params, video.raw_a, video.raw_v);
        for (const CoocMap& map : trace.cooc) {
            if (map.layer != last_layer || map.src != kAudio || map.dst != kVisual)
                continue;
            const index_t t = map.beta.dim(0);
            for (index_t ti = 0; ti < t; ++ti)
                for (index_t i = 0; i < k; ++i)
                    for (index_t j = 0; j < k; ++j)
                        acc[static_cast<std::size_t>(i * k + j)] +=
                            map.beta.at({ti, i, j});
            rows += t;
        }
    }
    if (rows == 0) throw ValidationError("export-cooc: no maps recorded");
    for (double& v : acc) v /= static_cast<double>(rows);
    json matrix = json::array();
    for (index_t i = 0; i < k; ++i) {
        json row = json::array();
        for (index_t j = 0; j < k; ++j)
            row.push_back(acc[static_cast<std::size_t>(i * k + j)]);
        matrix.push_back(std::move(row));
    }
    json out{{"k", k},
             {"classes", ds.class_names},
             {"videos", ds.videos.size()},
             {"layer", last_layer},
             {"pair", "audio->visual"},
             {"matrix", std::move(matrix)}};
    std::ofstream os(a.out, std::ios::trunc);
    if (!os) throw IoError("cannot write " + a.out);
    os << out.dump(2) << "\n";
    std::cout << "wrote mean beta(a,v) of layer " << last_layer << " over "
              << rows << " timesteps to " << a.out << "\n";
    return 0;
}

int run_export_embeddings(const ExportArgs& a) {
    std::cout << "resolved config:\n"
              << json{{"ckpt", a.ckpt}, {"data", a.data}, {"out", a.out}}.dump(2)
              << "\n";
    Checkpoint ckpt = load_checkpoint(a.ckpt);
    dataio::Dataset ds = dataio::load_dataset(a.data);
    if (ckpt.model.num_classes != ds.K)
        throw ValidationError("export-embeddings: checkpoint/dataset class mismatch");
    NoGradGuard ng;
    std::ofstream os(a.out, std::ios::trunc);
    if (!os) throw IoError("cannot write " + a.out);
    os << "video_id,modality,segment,slot,tag";
    for (index_t d = 0; d < ckpt.model.d2; ++d) os << ",c" << d;
    os << "\n";
    const index_t slices = ckpt.model.num_slices();
    std::uint64_t count = 0;
    for (const auto& video : ds.videos) {
        ForwardTrace trace = forward(ckpt.model, ckpt.params, video.raw_a, video.raw_v);
        for (int m = 0; m < 2; ++m) {
            const Tensor& dec = trace.decoupled[m];
            for (index_t t = 0; t < dec.dim(0); ++t) {
                for (index_t s = 0; s < slices; ++s) {
                    std::string tag;
                    if (!ckpt.model.decouple)
                        tag = "shared";
                    else if (ckpt.model.background && s == slices - 1)
                        tag = "background";
                    else
                        tag = ds.class_names[static_cast<std::size_t>(s)];
                    os << video.id << ',' << modality_tag(m) << ',' << t << ','
                       << s << ',' << tag;
                    char buf[32];
                    for (index_t d = 0; d < ckpt.model.d2; ++d) {
                        std::snprintf(buf, sizeof(buf), "%.17g", dec.at({t, s, d}));
                        os << ',' << buf;
                    }
                    os << "\n";
                    ++count;
                }
            }
        }
    }
    std::cout << "wrote " << count << " embedding rows to " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MM-CSE audio-visual video parsing: synthetic data, training, "
                 "evaluation, gradient checks, exports"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads,
                   "OpenMP thread count (0 = runtime default)");
    bool serial = false;
    app.add_flag("--serial", serial, "Force the serial kernel path");

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();
    gen_cmd->add_option("--videos", gen.cfg.num_videos, "Number of videos");
    gen_cmd->add_option("--segments", gen.cfg.T, "Segments per video");
    gen_cmd->add_option("--classes", gen.cfg.K, "Event classes");
    gen_cmd->add_option("--dims", gen.dims, "Raw feature dims Da,Dv");
    gen_cmd->add_option("--events", gen.events, "Events per video LO:HI");
    gen_cmd->add_option("--presence", gen.presence,
                        "Modality presence probabilities AUDIO:VISUAL:BOTH");
    gen_cmd->add_option("--bg-prob", gen.cfg.p_background_segment,
                        "Background-only segment probability");
    gen_cmd->add_option("--cooc", gen.cooc,
                        "Forced co-occurrence pair I:J:PROB (repeatable)");
    gen_cmd->add_option("--noise", gen.cfg.noise_sigma, "Feature noise sigma");
    gen_cmd->add_option("--seed", gen.cfg.seed, "Generator seed");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train on a dataset directory");
    train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
    train_cmd->add_option("--out", tr.out, "Output directory")->required();
    train_cmd->add_option("--config", tr.config_file,
                          "Read defaults from a key=value file (flags win)");
    train_cmd->add_option("--epochs", tr.cfg.epochs, "Training epochs");
    train_cmd->add_option("--batch", tr.cfg.batch_size, "Batch size");
    train_cmd->add_option("--lr", tr.cfg.lr, "Learning rate");
    train_cmd->add_option("--wd", tr.cfg.weight_decay, "Weight decay");
    train_cmd->add_option("--lambda1", tr.cfg.losses.lambda1,
                          "Orthogonality loss weight");
    train_cmd->add_option("--lambda2", tr.cfg.losses.lambda2,
                          "Co-occurrence loss weight");
    train_cmd->add_option("--losses", tr.losses,
                          "Enabled losses, comma list of basic,rec,ort,ec");
    train_cmd->add_option("--ablate", tr.ablate,
                          "Ablation switch (repeatable)")
        ->check(CLI::IsMember({"no-cafd", "no-bg", "no-secm", "no-lgsf",
                               "no-intra", "no-cross"}));
    train_cmd->add_option("--seed", tr.cfg.seed, "Training seed");
    train_cmd->add_option("--d1", tr.cfg.model.d1, "Holistic feature dim");
    train_cmd->add_option("--d2", tr.cfg.model.d2, "Class-wise feature dim");
    train_cmd->add_option("--layers", tr.cfg.model.num_layers, "FGSE layers");
    train_cmd->add_flag("--secm-projections,!--no-secm-projections",
                        tr.secm_projections, "Learn Q/K/V projections in SECM");
    train_cmd->add_option("--lgsf-residual", tr.lgsf_residual,
                          "LGSF residual source: hhat|z");
    train_cmd->add_option("--mmil", tr.mmil, "Video pooling: joint|factorized");
    train_cmd->add_option("--ort", tr.ort, "Orthogonality form: signed|absolute");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    eval_cmd->add_option("--threshold", ev.threshold, "Binarization threshold");
    eval_cmd->add_option("--report", ev.report, "Report form")
        ->check(CLI::IsMember({"text", "machine"}));
    eval_cmd->add_option("--out", ev.out, "Write the report here instead of stdout");

    GradCheckArgs gc;
    auto* gc_cmd = app.add_subcommand(
        "grad-check", "Verify analytic gradients against finite differences");
    gc_cmd->add_option("--seed", gc.seed, "Model/sample seed");
    gc_cmd->add_option("--t", gc.t, "Segments");
    gc_cmd->add_option("--k", gc.k, "Classes");
    gc_cmd->add_option("--d1", gc.d1, "Holistic feature dim");
    gc_cmd->add_option("--d2", gc.d2, "Class-wise feature dim");
    gc_cmd->add_option("--layers", gc.layers, "FGSE layers");
    gc_cmd->add_option("--da", gc.da, "Raw audio dim");
    gc_cmd->add_option("--dv", gc.dv, "Raw visual dim");
    gc_cmd->add_option("--step", gc.step, "Central difference step");
    gc_cmd->add_option("--tolerance", gc.tolerance, "Failure threshold");

    ExportArgs cooc_args;
    auto* cooc_cmd = app.add_subcommand(
        "export-cooc", "Export the mean cross-modal co-occurrence map");
    cooc_cmd->add_option("--ckpt", cooc_args.ckpt, "Checkpoint directory")->required();
    cooc_cmd->add_option("--data", cooc_args.data, "Dataset directory")->required();
    cooc_cmd->add_option("--out", cooc_args.out, "Output JSON file")->required();

    ExportArgs emb_args;
    auto* emb_cmd = app.add_subcommand(
        "export-embeddings", "Export decoupled per-segment features as CSV");
    emb_cmd->add_option("--ckpt", emb_args.ckpt, "Checkpoint directory")->required();
    emb_cmd->add_option("--data", emb_args.data, "Dataset directory")->required();
    emb_cmd->add_option("--out", emb_args.out, "Output CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    kernels::set_threads(threads);
    if (serial) kernels::set_mode(kernels::Mode::Serial);

    try {
        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (train_cmd->parsed()) {
            if (!tr.config_file.empty()) apply_train_config_file(tr, train_cmd);
            return run_train(tr);
        }
        if (eval_cmd->parsed()) return run_eval(ev);
        if (gc_cmd->parsed()) return run_grad_check(gc);
        if (cooc_cmd->parsed()) return run_export_cooc(cooc_args);
        if (emb_cmd->parsed()) return run_export_embeddings(emb_args);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
