#ifndef DDET_EVAL_HPP
#define DDET_EVAL_HPP

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/anchors.hpp"
#include "ddet/box.hpp"

namespace ddet {

struct PrPoint {
    double score;
    double precision;
    double recall;
};

struct ClassEval {
    double ap = 0;
    std::size_t n_gt = 0;
    std::vector<PrPoint> pr;
};

struct EvalResult {
    std::map<int, ClassEval> per_class;
    double mAP = 0;  // unweighted mean over classes with n_gt > 0
    double iou_threshold = 0.5;
};

struct FrameDetections {
    std::size_t frame;
    std::vector<Detection> dets;
};

struct FrameGt {
    std::size_t frame;
    std::vector<GtObject> objects;
};

struct ScoredFlag {
    double score;
    bool tp;
};

// Greedy TP/FP assignment for one class: detections descending by score, each
// takes the highest-IoU unmatched GT of its frame if IoU >= iou_thr. Ties go
// to the lower GT index.
inline std::vector<ScoredFlag> match_detections_to_gt(
    const std::vector<FrameDetections>& dets, const std::vector<FrameGt>& gts, int class_id,
    double iou_thr, std::size_t* n_gt_out) {
    std::map<std::size_t, std::vector<Box>> gt_boxes;
    std::size_t n_gt = 0;
    for (const FrameGt& fg : gts)
        for (const GtObject& o : fg.objects)
            if (o.class_id == class_id) {
                gt_boxes[fg.frame].push_back(o.box);
                ++n_gt;
            }
    if (n_gt_out) *n_gt_out = n_gt;

    struct Item {
        double score;
        std::size_t frame;
        Box box;
    };
    std::vector<Item> items;
    for (const FrameDetections& fd : dets)
        for (const Detection& d : fd.dets)
            if (d.class_id == class_id) items.push_back({d.score, fd.frame, d.box});
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.score > b.score; });

    std::map<std::size_t, std::vector<bool>> used;
    for (const auto& [f, boxes] : gt_boxes) used[f].assign(boxes.size(), false);

    std::vector<ScoredFlag> out;
    for (const Item& it : items) {
        bool tp = false;
        auto git = gt_boxes.find(it.frame);
        if (git != gt_boxes.end()) {
            std::size_t best = git->second.size();
            double best_iou = -1;
            for (std::size_t g = 0; g < git->second.size(); ++g) {
                if (used[it.frame][g]) continue;
                double v = iou(it.box, git->second[g]);
                if (v > best_iou) { best_iou = v; best = g; }
            }
            if (best != git->second.size() && best_iou >= iou_thr) {
                used[it.frame][best] = true;
                tp = true;
            }
        }
        out.push_back({it.score, tp});
    }
    return out;
}

// All-point interpolated AP: area under the monotone (from the right)
// precision envelope. `flags` must already be sorted descending by score.
inline double average_precision(const std::vector<ScoredFlag>& flags, std::size_t n_gt,
                                std::vector<PrPoint>* pr_out = nullptr) {
    if (n_gt == 0) return 0.0;
    std::vector<double> prec, rec;
    std::size_t tp = 0, fp = 0;
    for (const ScoredFlag& f : flags) {
        f.tp ? ++tp : ++fp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
        if (pr_out) pr_out->push_back({f.score, prec.back(), rec.back()});
    }
    // monotone envelope from the right
    for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0, prev_rec = 0;
    for (std::size_t i = 0; i < prec.size(); ++i) {
        ap += (rec[i] - prev_rec) * prec[i];
        prev_rec = rec[i];
    }
    return ap;
}

// 11-point interpolation variant (behind the --eleven-point flag).
inline double average_precision_11pt(const std::vector<ScoredFlag>& flags, std::size_t n_gt) {
    if (n_gt == 0) return 0.0;
    std::vector<double> prec, rec;
    std::size_t tp = 0, fp = 0;
    for (const ScoredFlag& f : flags) {
        f.tp ? ++tp : ++fp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    double ap = 0;
    for (int i = 0; i <= 10; ++i) {
        double r = i / 10.0;
        double best = 0;
        for (std::size_t j = 0; j < prec.size(); ++j)
            if (rec[j] >= r) best = std::max(best, prec[j]);
        ap += best / 11.0;
    }
    return ap;
}

inline double mean_ap(const std::map<int, ClassEval>& per_class) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [cls, e] : per_class)
        if (e.n_gt > 0) { sum += e.ap; ++n; }
    if (n == 0) throw std::invalid_argument("mean_ap: no class has ground truth");
    return sum / static_cast<double>(n);
}

inline EvalResult evaluate_detections(const std::vector<FrameDetections>& dets,
                                      const std::vector<FrameGt>& gts, int num_classes,
                                      double iou_thr = 0.5, bool eleven_point = false) {
    EvalResult res;
    res.iou_threshold = iou_thr;
    for (int c = 0; c < num_classes; ++c) {
        ClassEval ce;
        std::vector<ScoredFlag> flags = match_detections_to_gt(dets, gts, c, iou_thr, &ce.n_gt);
        ce.ap = eleven_point ? average_precision_11pt(flags, ce.n_gt)
                             : average_precision(flags, ce.n_gt, &ce.pr);
        res.per_class.emplace(c, std::move(ce));
    }
    res.mAP = mean_ap(res.per_class);
    return res;
}

// CSV: class,ap,n_gt rows plus a final mAP row.
inline void write_eval_csv(std::ostream& os, const EvalResult& r,
                           const std::vector<std::string>& class_names) {
    os << "class,ap,n_gt\n";
    char buf[160];
    for (const auto& [cls, e] : r.per_class) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%zu\n",
                      class_names.at(static_cast<std::size_t>(cls)).c_str(), e.ap, e.n_gt);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "mAP,%.6f,\n", r.mAP);
    os << buf;
}

inline void write_pr_csv(std::ostream& os, const EvalResult& r,
                         const std::vector<std::string>& class_names) {
    os << "class,score,precision,recall\n";
    char buf[200];
    for (const auto& [cls, e] : r.per_class)
        for (const PrPoint& p : e.pr) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n",
                          class_names.at(static_cast<std::size_t>(cls)).c_str(), p.score,
                          p.precision, p.recall);
            os << buf;
        }
}

// CSV: frame,class,score,x1,y1,x2,y2 — descending score within each frame.
inline void write_detections_csv(std::ostream& os, const std::vector<FrameDetections>& frames,
                                 const std::vector<std::string>& class_names) {
    os << "frame,class,score,x1,y1,x2,y2\n";
    char buf[256];
    for (const FrameDetections& fd : frames) {
        std::vector<Detection> sorted = fd.dets;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
        for (const Detection& d : sorted) {
            std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,%.2f,%.2f,%.2f,%.2f\n", fd.frame,
                          class_names.at(static_cast<std::size_t>(d.class_id)).c_str(), d.score,
                          d.box.x1, d.box.y1, d.box.x2, d.box.y2);
            os << buf;
        }
    }
}

}  // namespace ddet

#endif
