#include "mmcse/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mmcse::dataio {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'M', 'C', 'T'};
constexpr std::uint8_t kVersion = 0x01;
// Declared extents may not multiply out past this many elements.
constexpr std::uint64_t kMaxElements = 1ull << 40;

void put_u32le(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF),
                           static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF),
                           static_cast<char>((v >> 24) & 0xFF)};
    os.write(bytes, 4);
}

void put_f64le(std::ostream& os, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(bytes, 8);
}

std::uint32_t get_u32le(std::istream& is, const std::string& path) {
    unsigned char bytes[4];
    if (!is.read(reinterpret_cast<char*>(bytes), 4))
        throw TruncatedFileError(path + ": truncated header");
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

double get_f64le(std::istream& is, const std::string& path) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8))
        throw TruncatedFileError(path + ": truncated payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (!t.defined()) throw IoError("write_tensor: undefined tensor");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("write_tensor: cannot open " + path.string());
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    os.put(static_cast<char>(t.rank()));
    for (index_t d : t.shape()) put_u32le(os, static_cast<std::uint32_t>(d));
    const double* d = t.data();
    for (index_t i = 0; i < t.numel(); ++i) put_f64le(os, d[i]);
    if (!os) throw IoError("write_tensor: write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_tensor: cannot open " + path.string());
    char magic[4];
    if (!is.read(magic, 4))
        throw TruncatedFileError(path.string() + ": shorter than the magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw BadMagicError(path.string() + ": bad magic bytes");
    const int version = is.get();
    if (version == std::char_traits<char>::eof())
        throw TruncatedFileError(path.string() + ": truncated header");
    if (version != kVersion)
        throw BadMagicError(path.string() + ": unsupported version " +
                            std::to_string(version));
    const int rank = is.get();
    if (rank == std::char_traits<char>::eof())
        throw TruncatedFileError(path.string() + ": truncated header");
    if (rank < 1)
        throw ExtentError(path.string() + ": rank must be >= 1");
    Shape shape;
    std::uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32le(is, path.string());
        if (d == 0) throw ExtentError(path.string() + ": zero extent");
        count *= d;
        if (count > kMaxElements)
            throw ExtentError(path.string() + ": extents overflow");
        shape.push_back(static_cast<index_t>(d));
    }
    std::vector<double> values(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i)
        values[static_cast<std::size_t>(i)] = get_f64le(is, path.string());
    // Trailing bytes mean the declared extents do not match the payload.
    if (is.peek() != std::char_traits<char>::eof())
        throw TruncatedFileError(path.string() +
                                 ": payload longer than declared extents");
    return Tensor::from_vector(std::move(shape), std::move(values));
}

void SynthConfig::validate() const {
    if (num_videos < 1) throw ValidationError("synth: num_videos must be >= 1");
    if (T < 1 || K < 1) throw ValidationError("synth: T and K must be >= 1");
    if (D_a < 1 || D_v < 1) throw ValidationError("synth: feature dims must be >= 1");
    if (events_min < 0 || events_max < events_min)
        throw ValidationError("synth: bad events_per_video range");
    if (events_max > K)
        throw ValidationError("synth: events_per_video exceeds the class count");
    for (double p : {p_audio_only, p_visual_only, p_both, p_background_segment}) {
        if (p < 0.0 || p > 1.0)
            throw ValidationError("synth: probabilities must lie in [0,1]");
    }
    if (std::fabs(p_audio_only + p_visual_only + p_both - 1.0) > 1e-9)
        throw ValidationError("synth: modality presence probabilities must sum to 1");
    if (noise_sigma < 0.0) throw ValidationError("synth: noise sigma must be >= 0");
    for (const CoocPair& p : cooc) {
        if (K < 2)
            throw ValidationError("synth: co-occurrence pairs need K >= 2");
        if (p.lead < 0 || p.lead >= K || p.follow < 0 || p.follow >= K ||
            p.lead == p.follow)
            throw ValidationError("synth: co-occurrence pair out of range");
        if (p.prob < 0.0 || p.prob > 1.0)
            throw ValidationError("synth: co-occurrence boost must lie in [0,1]");
    }
}

namespace {

std::vector<double> unit_gaussian(index_t dim, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
    return v;
}

struct EventInstance {
    index_t cls, start, end;
    bool in_a, in_v;
};

// Maximal runs of segments not reserved as background.
std::vector<std::pair<index_t, index_t>> free_runs(const std::vector<bool>& bg) {
    std::vector<std::pair<index_t, index_t>> runs;
    const index_t t = static_cast<index_t>(bg.size());
    index_t i = 0;
    while (i < t) {
        if (!bg[static_cast<std::size_t>(i)]) {
            index_t e = i + 1;
            while (e < t && !bg[static_cast<std::size_t>(e)]) ++e;
            runs.emplace_back(i, e);
            i = e;
        } else {
            ++i;
        }
    }
    return runs;
}

}  // namespace

Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    Dataset ds;
    ds.T = cfg.T;
    ds.K = cfg.K;
    ds.D_a = cfg.D_a;
    ds.D_v = cfg.D_v;
    for (index_t k = 0; k < cfg.K; ++k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "class_%02lld", static_cast<long long>(k));
        ds.class_names.emplace_back(buf);
    }

    // Per modality: K class prototypes plus one background prototype.
    std::array<std::vector<std::vector<double>>, 2> protos;
    std::array<std::vector<double>, 2> bg_proto;
    const std::array<index_t, 2> dims = {cfg.D_a, cfg.D_v};
    for (int m = 0; m < 2; ++m) {
        for (index_t k = 0; k < cfg.K; ++k)
            protos[m].push_back(unit_gaussian(dims[m], rng));
        bg_proto[m] = unit_gaussian(dims[m], rng);
    }

    for (index_t vi = 0; vi < cfg.num_videos; ++vi) {
        VideoSample video;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "video_%04lld", static_cast<long long>(vi));
        video.id = buf;

        std::vector<bool> bg_mask(static_cast<std::size_t>(cfg.T));
        for (index_t t = 0; t < cfg.T; ++t)
            bg_mask[static_cast<std::size_t>(t)] =
                rng.bernoulli(cfg.p_background_segment);

        // Distinct classes for this video's events.
        std::vector<index_t> classes(static_cast<std::size_t>(cfg.K));
        for (index_t k = 0; k < cfg.K; ++k) classes[static_cast<std::size_t>(k)] = k;
        for (index_t k = cfg.K - 1; k > 0; --k)
            std::swap(classes[static_cast<std::size_t>(k)],
                      classes[static_cast<std::size_t>(rng.range(0, k))]);
        const index_t n_events = rng.range(cfg.events_min, cfg.events_max);

        std::vector<EventInstance> instances;
        const auto runs = free_runs(bg_mask);
        for (index_t e = 0; e < n_events && !runs.empty(); ++e) {
            const auto [rs, re] =
                runs[static_cast<std::size_t>(rng.range(0, static_cast<index_t>(runs.size()) - 1))];
            const index_t len = rng.range(1, re - rs);
            const index_t start = rng.range(rs, re - len);
            const double u = rng.uniform();
            EventInstance inst;
            inst.cls = classes[static_cast<std::size_t>(e)];
            inst.start = start;
            inst.end = start + len;
            inst.in_a = u < cfg.p_audio_only || u >= cfg.p_audio_only + cfg.p_visual_only;
            inst.in_v = u >= cfg.p_audio_only;
            instances.push_back(inst);
        }

        // Forced co-occurrence: audio lead spawns a visual follower.
        const std::size_t base_count = instances.size();
        for (const CoocPair& pair : cfg.cooc) {
            for (std::size_t i = 0; i < base_count; ++i) {
                const EventInstance& inst = instances[i];
                if (inst.cls == pair.lead && inst.in_a && rng.bernoulli(pair.prob))
                    instances.push_back({pair.follow, inst.start, inst.end, false, true});
            }
        }

        Tensor seg_a = Tensor::zeros({cfg.T, cfg.K});
        Tensor seg_v = Tensor::zeros({cfg.T, cfg.K});
        Tensor video_label = Tensor::zeros({1, cfg.K});
        for (const EventInstance& inst : instances) {
            for (index_t t = inst.start; t < inst.end; ++t) {
                if (inst.in_a) seg_a.mutable_data()[t * cfg.K + inst.cls] = 1.0;
                if (inst.in_v) seg_v.mutable_data()[t * cfg.K + inst.cls] = 1.0;
            }
            video_label.mutable_data()[inst.cls] = 1.0;
        }

        Tensor raw_a = Tensor::zeros({cfg.T, cfg.D_a});
        Tensor raw_v = Tensor::zeros({cfg.T, cfg.D_v});
        const std::array<Tensor*, 2> raw = {&raw_a, &raw_v};
        const std::array<const Tensor*, 2> seg = {&seg_a, &seg_v};
        for (int m = 0; m < 2; ++m) {
            for (index_t t = 0; t < cfg.T; ++t) {
                double* row = raw[m]->mutable_data() + t * dims[m];
                for (index_t d = 0; d < dims[m]; ++d) row[d] = bg_proto[m][static_cast<std::size_t>(d)];
                for (index_t k = 0; k < cfg.K; ++k) {
                    if (seg[m]->data()[t * cfg.K + k] == 1.0) {
                        const auto& proto = protos[m][static_cast<std::size_t>(k)];
                        for (index_t d = 0; d < dims[m]; ++d)
                            row[d] += proto[static_cast<std::size_t>(d)];
                    }
                }
                if (cfg.noise_sigma > 0.0) {
                    for (index_t d = 0; d < dims[m]; ++d)
                        row[d] += cfg.noise_sigma * rng.normal();
                }
                double sq = 0.0;
                for (index_t d = 0; d < dims[m]; ++d) sq += row[d] * row[d];
                const double norm = std::sqrt(sq);
                if (norm > 0.0) {
                    for (index_t d = 0; d < dims[m]; ++d) row[d] /= norm;
                }
            }
        }

        video.raw_a = raw_a;
        video.raw_v = raw_v;
        video.ann = Annotations{video_label, seg_a, seg_v};
        ds.videos.push_back(std::move(video));
    }

    ds.validate();
    return ds;
}

void Dataset::validate() const {
    if (videos.empty()) throw ValidationError("dataset: no videos");
    if (static_cast<index_t>(class_names.size()) != K)
        throw ValidationError("dataset: class name count does not match K");
    for (const VideoSample& v : videos) {
        if (v.raw_a.shape() != Shape{T, D_a})
            throw ValidationError("dataset: " + v.id + ": audio features " +
                                  shape_str(v.raw_a.shape()) + ", expected [" +
                                  std::to_string(T) + "," + std::to_string(D_a) + "]");
        if (v.raw_v.shape() != Shape{T, D_v})
            throw ValidationError("dataset: " + v.id + ": visual features " +
                                  shape_str(v.raw_v.shape()) + ", expected [" +
                                  std::to_string(T) + "," + std::to_string(D_v) + "]");
        v.raw_a.check_finite(("dataset: " + v.id + ": audio features").c_str());
        v.raw_v.check_finite(("dataset: " + v.id + ": visual features").c_str());
        v.ann.validate(T, K, "dataset: " + v.id);
    }
}

namespace {

json labels_to_json(const Annotations& ann) {
    auto grid_to_json = [](const Tensor& t) {
        json rows = json::array();
        for (index_t r = 0; r < t.dim(0); ++r) {
            json row = json::array();
            for (index_t c = 0; c < t.dim(1); ++c)
                row.push_back(static_cast<int>(t.at({r, c})));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    json video = json::array();
    for (index_t c = 0; c < ann.video.dim(1); ++c)
        video.push_back(static_cast<int>(ann.video.at({0, c})));
    return json{{"video", std::move(video)},
                {"audio", grid_to_json(ann.seg_a)},
                {"visual", grid_to_json(ann.seg_v)}};
}

Tensor grid_from_json(const json& rows, index_t t, index_t k,
                      const std::string& who) {
    if (static_cast<index_t>(rows.size()) != t)
        throw ValidationError(who + ": expected " + std::to_string(t) + " rows");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(t * k));
    for (const auto& row : rows) {
        if (static_cast<index_t>(row.size()) != k)
            throw ValidationError(who + ": expected " + std::to_string(k) +
                                  " columns per row");
        for (const auto& cell : row) {
            if (!cell.is_number_integer())
                throw ValidationError(who + ": labels must be integer 0/1");
            const int v = cell.get<int>();
            if (v != 0 && v != 1)
                throw ValidationError(who + ": labels must be 0/1");
            values.push_back(static_cast<double>(v));
        }
    }
    return Tensor::from_vector({t, k}, std::move(values));
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);
    json manifest{{"format", "mmcse-dataset"},
                  {"version", 1},
                  {"t", ds.T},
                  {"k", ds.K},
                  {"d_a", ds.D_a},
                  {"d_v", ds.D_v},
                  {"classes", ds.class_names}};
    json ids = json::array();
    for (const VideoSample& v : ds.videos) ids.push_back(v.id);
    manifest["videos"] = std::move(ids);
    {
        std::ofstream os(dir / "manifest.json", std::ios::trunc);
        if (!os) throw IoError("save_dataset: cannot write manifest");
        os << manifest.dump(2) << "\n";
    }
    for (const VideoSample& v : ds.videos) {
        write_tensor(dir / (v.id + ".a.mmct"), v.raw_a);
        write_tensor(dir / (v.id + ".v.mmct"), v.raw_v);
        std::ofstream os(dir / (v.id + ".labels.json"), std::ios::trunc);
        if (!os) throw IoError("save_dataset: cannot write labels for " + v.id);
        os << labels_to_json(v.ann).dump(2) << "\n";
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream ms(dir / "manifest.json");
    if (!ms)
        throw IoError("load_dataset: missing manifest.json in " + dir.string());
    json manifest;
    try {
        ms >> manifest;
    } catch (const json::exception& e) {
        throw ValidationError("load_dataset: malformed manifest: " +
                              std::string(e.what()));
    }
    Dataset ds;
    try {
        ds.T = manifest.at("t").get<index_t>();
        ds.K = manifest.at("k").get<index_t>();
        ds.D_a = manifest.at("d_a").get<index_t>();
        ds.D_v = manifest.at("d_v").get<index_t>();
        ds.class_names = manifest.at("classes").get<std::vector<std::string>>();
        for (const auto& id : manifest.at("videos")) {
            VideoSample v;
            v.id = id.get<std::string>();
            v.raw_a = read_tensor(dir / (v.id + ".a.mmct"));
            v.raw_v = read_tensor(dir / (v.id + ".v.mmct"));
            std::ifstream ls(dir / (v.id + ".labels.json"));
            if (!ls)
                throw ValidationError("load_dataset: " + v.id + ": missing labels");
            json labels;
            ls >> labels;
            v.ann.video = grid_from_json(json::array({labels.at("video")}), 1,
                                         ds.K, v.id + ": video label");
            v.ann.seg_a =
                grid_from_json(labels.at("audio"), ds.T, ds.K, v.id + ": audio labels");
            v.ann.seg_v = grid_from_json(labels.at("visual"), ds.T, ds.K,
                                         v.id + ": visual labels");
            ds.videos.push_back(std::move(v));
        }
    } catch (const json::exception& e) {
        throw ValidationError("load_dataset: malformed field: " +
                              std::string(e.what()));
    }
    ds.validate();
    return ds;
}

}  // namespace mmcse::dataio
