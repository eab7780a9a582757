#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmcse/losses.hpp"
#include "mmcse/tensor.hpp"

namespace mmcse::dataio {

// MMCT tensor file: magic "MMCT", version byte 0x01, rank byte, rank
// little-endian uint32 extents, then the row-major IEEE-754 little-endian
// f64 payload. Round-trips are bitwise lossless.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

struct VideoSample {
    std::string id;
    Tensor raw_a;  // [T, D_a]
    Tensor raw_v;  // [T, D_v]
    Annotations ann;
};

struct Dataset {
    index_t T = 0, K = 0, D_a = 0, D_v = 0;
    std::vector<std::string> class_names;
    std::vector<VideoSample> videos;

    void validate() const;
};

// Directed audio->visual forced co-occurrence: whenever an event of class
// `lead` is placed with audio presence, a visual event of class `follow`
// with the same temporal extent follows with probability `prob`.
struct CoocPair {
    index_t lead = 0;
    index_t follow = 0;
    double prob = 1.0;
};

struct SynthConfig {
    index_t num_videos = 32;
    index_t T = 10;
    index_t K = 5;
    index_t D_a = 64;
    index_t D_v = 64;
    index_t events_min = 1;
    index_t events_max = 2;
    // Modality presence of each event instance; must sum to 1.
    double p_audio_only = 0.25;
    double p_visual_only = 0.25;
    double p_both = 0.5;
    // Probability that a segment is reserved as pure background.
    double p_background_segment = 0.2;
    std::vector<CoocPair> cooc;
    double noise_sigma = 0.05;
    std::uint64_t seed = 7;

    void validate() const;
};

// Unit-norm class and background prototypes per modality; each segment's raw
// feature is the L2-normalized sum of its active prototypes, the background
// prototype, and Gaussian noise. Identical configs give identical bytes.
Dataset generate(const SynthConfig& cfg);

// Layout: manifest.json, then per video <id>.a.mmct, <id>.v.mmct,
// <id>.labels.json with integer 0/1 labels.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mmcse::dataio
