#include "mmcse/metrics.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace mmcse::metrics {

BinaryGrid binarize(const Tensor& p, double threshold) {
    if (p.rank() != 2)
        throw ShapeError("binarize: expected [T,K], got " + shape_str(p.shape()));
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValueError("binarize: threshold must lie in (0,1)");
    BinaryGrid g;
    g.T = p.dim(0);
    g.K = p.dim(1);
    g.cells.resize(static_cast<std::size_t>(g.T * g.K));
    const double* d = p.data();
    for (index_t i = 0; i < g.T * g.K; ++i)
        g.cells[static_cast<std::size_t>(i)] = d[i] >= threshold ? 1 : 0;
    return g;
}

BinaryGrid and_grids(const BinaryGrid& a, const BinaryGrid& b) {
    if (a.T != b.T || a.K != b.K)
        throw ShapeError("and_grids: grid size mismatch");
    BinaryGrid g = a;
    for (std::size_t i = 0; i < g.cells.size(); ++i)
        g.cells[i] = a.cells[i] && b.cells[i] ? 1 : 0;
    return g;
}

double F1Counts::f1() const {
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) /
           static_cast<double>(2 * tp + fp + fn);
}

F1Counts& F1Counts::operator+=(const F1Counts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

F1Counts segment_counts(const BinaryGrid& pred, const BinaryGrid& gt) {
    if (pred.T != gt.T || pred.K != gt.K)
        throw ShapeError("segment_counts: grid size mismatch");
    F1Counts c;
    for (std::size_t i = 0; i < pred.cells.size(); ++i) {
        if (pred.cells[i] && gt.cells[i])
            ++c.tp;
        else if (pred.cells[i])
            ++c.fp;
        else if (gt.cells[i])
            ++c.fn;
    }
    return c;
}

double segment_f1(const BinaryGrid& pred, const BinaryGrid& gt) {
    return segment_counts(pred, gt).f1();
}

std::vector<EventProposal> extract_events(const BinaryGrid& grid) {
    std::vector<EventProposal> events;
    for (index_t k = 0; k < grid.K; ++k) {
        index_t t = 0;
        while (t < grid.T) {
            if (grid.get(t, k)) {
                index_t end = t + 1;
                while (end < grid.T && grid.get(end, k)) ++end;
                events.push_back({k, t, end});
                t = end;
            } else {
                ++t;
            }
        }
    }
    return events;
}

namespace {

double temporal_iou(const EventProposal& a, const EventProposal& b) {
    const index_t inter = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (inter <= 0) return 0.0;
    const index_t uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    return static_cast<double>(inter) / static_cast<double>(uni);
}

bool proposal_order(const EventProposal& a, const EventProposal& b) {
    return a.cls != b.cls ? a.cls < b.cls : a.start < b.start;
}

}  // namespace

F1Counts match_events(const std::vector<EventProposal>& pred,
                      const std::vector<EventProposal>& gt, double iou_min) {
    std::vector<EventProposal> ps = pred, gs = gt;
    std::sort(ps.begin(), ps.end(), proposal_order);
    std::sort(gs.begin(), gs.end(), proposal_order);
    std::vector<bool> taken(gs.size(), false);
    F1Counts c;
    for (const auto& p : ps) {
        bool matched = false;
        for (std::size_t i = 0; i < gs.size(); ++i) {
            if (taken[i] || gs[i].cls != p.cls) continue;
            if (temporal_iou(p, gs[i]) >= iou_min) {
                taken[i] = true;
                matched = true;
                break;
            }
        }
        if (matched)
            ++c.tp;
        else
            ++c.fp;
    }
    for (std::size_t i = 0; i < gs.size(); ++i) {
        if (!taken[i]) ++c.fn;
    }
    return c;
}

double event_f1(const std::vector<EventProposal>& pred,
                const std::vector<EventProposal>& gt, double iou_min) {
    return match_events(pred, gt, iou_min).f1();
}

namespace {

constexpr double kIouMin = 0.5;

struct VideoScores {
    double seg[3];  // A, V, AV
    double seg_event;
    double ev[3];
    double ev_event;
};

VideoScores score_video(const VideoPrediction& pred, const Annotations& ann,
                        double threshold) {
    BinaryGrid pa = binarize(pred.prob_a, threshold);
    BinaryGrid pv = binarize(pred.prob_v, threshold);
    BinaryGrid pav = and_grids(pa, pv);
    // Labels are exact 0/1, any interior threshold recovers them.
    BinaryGrid ga = binarize(ann.seg_a, 0.5);
    BinaryGrid gv = binarize(ann.seg_v, 0.5);
    BinaryGrid gav = and_grids(ga, gv);

    VideoScores s{};
    const F1Counts seg_a = segment_counts(pa, ga);
    const F1Counts seg_v = segment_counts(pv, gv);
    s.seg[0] = seg_a.f1();
    s.seg[1] = seg_v.f1();
    s.seg[2] = segment_f1(pav, gav);
    F1Counts seg_pool = seg_a;
    seg_pool += seg_v;
    s.seg_event = seg_pool.f1();

    const auto pea = extract_events(pa);
    const auto pev = extract_events(pv);
    const F1Counts ev_a = match_events(pea, extract_events(ga), kIouMin);
    const F1Counts ev_v = match_events(pev, extract_events(gv), kIouMin);
    s.ev[0] = ev_a.f1();
    s.ev[1] = ev_v.f1();
    s.ev[2] = event_f1(extract_events(pav), extract_events(gav), kIouMin);
    F1Counts ev_pool = ev_a;
    ev_pool += ev_v;
    s.ev_event = ev_pool.f1();
    return s;
}

}  // namespace

MetricReport evaluate(const std::vector<VideoPrediction>& predictions,
                      const std::vector<Annotations>& annotations,
                      double threshold) {
    if (predictions.size() != annotations.size())
        throw ValidationError("evaluate: " + std::to_string(predictions.size()) +
                              " predictions vs " +
                              std::to_string(annotations.size()) +
                              " annotated videos");
    if (predictions.empty()) throw ValidationError("evaluate: empty dataset");

    const double n = static_cast<double>(predictions.size());
    MetricReport r;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const VideoScores s = score_video(predictions[i], annotations[i], threshold);
        r.segment_a += s.seg[0];
        r.segment_v += s.seg[1];
        r.segment_av += s.seg[2];
        r.segment_type += (s.seg[0] + s.seg[1] + s.seg[2]) / 3.0;
        r.segment_event += s.seg_event;
        r.event_a += s.ev[0];
        r.event_v += s.ev[1];
        r.event_av += s.ev[2];
        r.event_type += (s.ev[0] + s.ev[1] + s.ev[2]) / 3.0;
        r.event_event += s.ev_event;
    }
    for (double* v : {&r.segment_a, &r.segment_v, &r.segment_av, &r.segment_type,
                      &r.segment_event, &r.event_a, &r.event_v, &r.event_av,
                      &r.event_type, &r.event_event})
        *v /= n;
    r.average = (r.segment_a + r.segment_v + r.segment_av + r.segment_type +
                 r.segment_event + r.event_a + r.event_v + r.event_av +
                 r.event_type + r.event_event) /
                10.0;
    return r;
}

std::string MetricReport::to_text(double threshold) const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "# avvp f-scores x100 (threshold=" << threshold
       << ", event IoU>=" << kIouMin
       << ", greedy first-fit matching, empty-vs-empty F1=1)\n";
    os << "segment_a       " << 100.0 * segment_a << "\n";
    os << "segment_v       " << 100.0 * segment_v << "\n";
    os << "segment_av      " << 100.0 * segment_av << "\n";
    os << "segment_type    " << 100.0 * segment_type << "\n";
    os << "segment_event   " << 100.0 * segment_event << "\n";
    os << "event_a         " << 100.0 * event_a << "\n";
    os << "event_v         " << 100.0 * event_v << "\n";
    os << "event_av        " << 100.0 * event_av << "\n";
    os << "event_type      " << 100.0 * event_type << "\n";
    os << "event_event     " << 100.0 * event_event << "\n";
    os << "average         " << 100.0 * average << "\n";
    return os.str();
}

std::string MetricReport::to_json_string(double threshold) const {
    nlohmann::json j{{"threshold", threshold},
                     {"iou_min", kIouMin},
                     {"segment",
                      {{"a", segment_a},
                       {"v", segment_v},
                       {"av", segment_av},
                       {"type", segment_type},
                       {"event", segment_event}}},
                     {"event",
                      {{"a", event_a},
                       {"v", event_v},
                       {"av", event_av},
                       {"type", event_type},
                       {"event", event_event}}},
                     {"average", average}};
    return j.dump(2);
}

MetricReport metric_report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    MetricReport r;
    r.segment_a = j.at("segment").at("a").get<double>();
    r.segment_v = j.at("segment").at("v").get<double>();
    r.segment_av = j.at("segment").at("av").get<double>();
    r.segment_type = j.at("segment").at("type").get<double>();
    r.segment_event = j.at("segment").at("event").get<double>();
    r.event_a = j.at("event").at("a").get<double>();
    r.event_v = j.at("event").at("v").get<double>();
    r.event_av = j.at("event").at("av").get<double>();
    r.event_type = j.at("event").at("type").get<double>();
    r.event_event = j.at("event").at("event").get<double>();
    r.average = j.at("average").get<double>();
    return r;
}

}  // namespace mmcse::metrics
