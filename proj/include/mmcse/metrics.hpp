#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmcse/losses.hpp"
#include "mmcse/tensor.hpp"

// The AVVP evaluation protocol: segment-level and event-level F-scores for
// the audio, visual, and audio-visual streams, plus Type@AV and Event@AV,
// averaged per video and then over the dataset.
//
// Protocol decisions (unstated upstream, pinned here): threshold comparison
// is >=, event intervals are half-open, event matching is greedy first-fit in
// (class, start) order at temporal IoU >= 0.5, and a stream with no predicted
// and no ground-truth positives scores F1 = 1.

namespace mmcse::metrics {

struct BinaryGrid {
    index_t T = 0, K = 0;
    std::vector<std::uint8_t> cells;  // row-major [T,K]

    std::uint8_t get(index_t t, index_t k) const {
        return cells[static_cast<std::size_t>(t * K + k)];
    }
    void set(index_t t, index_t k, std::uint8_t v) {
        cells[static_cast<std::size_t>(t * K + k)] = v;
    }
};

// Entry 1 iff p >= threshold.
BinaryGrid binarize(const Tensor& p, double threshold);
BinaryGrid and_grids(const BinaryGrid& a, const BinaryGrid& b);

struct F1Counts {
    index_t tp = 0, fp = 0, fn = 0;
    double f1() const;  // 2TP/(2TP+FP+FN); 1 when all counts are zero
    F1Counts& operator+=(const F1Counts& other);
};

F1Counts segment_counts(const BinaryGrid& pred, const BinaryGrid& gt);
double segment_f1(const BinaryGrid& pred, const BinaryGrid& gt);

// Maximal run of consecutive positive segments for one class, [start, end).
struct EventProposal {
    index_t cls = 0;
    index_t start = 0;
    index_t end = 0;
};

// Proposals ordered by (class, start).
std::vector<EventProposal> extract_events(const BinaryGrid& grid);

// Greedy first-fit matching at temporal IoU >= iou_min within each class.
F1Counts match_events(const std::vector<EventProposal>& pred,
                      const std::vector<EventProposal>& gt, double iou_min);
double event_f1(const std::vector<EventProposal>& pred,
                const std::vector<EventProposal>& gt, double iou_min = 0.5);

struct VideoPrediction {
    Tensor prob_a;  // [T,K]
    Tensor prob_v;  // [T,K]
};

struct MetricReport {
    double segment_a = 0, segment_v = 0, segment_av = 0;
    double segment_type = 0, segment_event = 0;
    double event_a = 0, event_v = 0, event_av = 0;
    double event_type = 0, event_event = 0;
    double average = 0;

    std::string to_text(double threshold) const;
    std::string to_json_string(double threshold) const;
};
MetricReport metric_report_from_json(const std::string& text);

MetricReport evaluate(const std::vector<VideoPrediction>& predictions,
                      const std::vector<Annotations>& annotations,
                      double threshold = 0.5);

}  // namespace mmcse::metrics
