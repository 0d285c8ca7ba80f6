#ifndef DDET_ANCHORS_HPP
#define DDET_ANCHORS_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ddet/box.hpp"

namespace ddet {

// Three pyramid levels, 9 anchors per cell (3 scales x 3 ratios).
struct PyramidConfig {
    std::vector<int> strides = {4, 8, 16};
    std::vector<double> base_sizes = {16, 32, 64};
    std::vector<double> scales = {1.0, std::pow(2.0, 1.0 / 3.0), std::pow(2.0, 2.0 / 3.0)};
    std::vector<double> ratios = {0.5, 1.0, 2.0};  // height/width
    int feature_channels = 32;
    int num_classes = 3;
    double pos_thr = 0.5;
    double neg_thr = 0.4;

    int max_stride() const { return strides.back(); }
    int anchors_per_cell() const {
        return static_cast<int>(scales.size() * ratios.size());
    }
};

struct AnchorLevel {
    int stride;
    std::size_t grid_h;
    std::size_t grid_w;
    int anchors_per_cell;
};

// Anchors in canonical order: level-major, then row-major over cells, then
// (ratio, scale) index. Heads must emit in the same order.
struct AnchorSet {
    std::vector<AnchorLevel> levels;
    std::vector<Box> boxes;

    std::size_t level_offset(std::size_t li) const {
        std::size_t off = 0;
        for (std::size_t i = 0; i < li; ++i)
            off += levels[i].grid_h * levels[i].grid_w *
                   static_cast<std::size_t>(levels[i].anchors_per_cell);
        return off;
    }
};

inline AnchorSet generate_anchors(std::size_t image_h, std::size_t image_w,
                                  const PyramidConfig& cfg) {
    if (image_h % cfg.max_stride() != 0 || image_w % cfg.max_stride() != 0)
        throw std::invalid_argument("generate_anchors: image size not divisible by max stride");
    AnchorSet out;
    for (std::size_t li = 0; li < cfg.strides.size(); ++li) {
        int stride = cfg.strides[li];
        double base = cfg.base_sizes[li];
        std::size_t gh = image_h / static_cast<std::size_t>(stride);
        std::size_t gw = image_w / static_cast<std::size_t>(stride);
        out.levels.push_back({stride, gh, gw, cfg.anchors_per_cell()});
        for (std::size_t i = 0; i < gh; ++i)
            for (std::size_t j = 0; j < gw; ++j) {
                double cx = (static_cast<double>(j) + 0.5) * stride;
                double cy = (static_cast<double>(i) + 0.5) * stride;
                for (double r : cfg.ratios)
                    for (double k : cfg.scales) {
                        double w = base * k / std::sqrt(r);
                        double h = base * k * std::sqrt(r);
                        out.boxes.push_back(
                            {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
                    }
            }
    }
    return out;
}

struct GtObject {
    Box box;
    int class_id = 0;
};

enum class AnchorLabel : std::int8_t { Negative = -1, Ignore = 0, Positive = 1 };

struct MatchResult {
    std::vector<AnchorLabel> labels;     // per anchor
    std::vector<int> gt_index;           // valid where label == Positive
    std::size_t n_pos = 0;
};

// IoU-threshold assignment with forced coverage: each GT's best anchor is
// positive even below pos_thr. If two GTs share a best anchor, the higher
// IoU wins and the loser takes its best unclaimed anchor.
inline MatchResult match_anchors(const AnchorSet& anchors, const std::vector<GtObject>& gt,
                                 double pos_thr = 0.5, double neg_thr = 0.4) {
    if (anchors.boxes.empty()) throw std::invalid_argument("match_anchors: empty anchor set");
    if (neg_thr < 0 || pos_thr > 1 || neg_thr > pos_thr)
        throw std::invalid_argument("match_anchors: need 0 <= neg_thr <= pos_thr <= 1");
    const std::size_t A = anchors.boxes.size();
    MatchResult res;
    res.labels.assign(A, AnchorLabel::Negative);
    res.gt_index.assign(A, -1);
    if (gt.empty()) return res;

    std::vector<std::vector<double>> m(A, std::vector<double>(gt.size()));
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t g = 0; g < gt.size(); ++g) m[a][g] = iou(anchors.boxes[a], gt[g].box);

    for (std::size_t a = 0; a < A; ++a) {
        std::size_t best_g = 0;
        double best = m[a][0];
        for (std::size_t g = 1; g < gt.size(); ++g)
            if (m[a][g] > best) { best = m[a][g]; best_g = g; }
        if (best >= pos_thr) {
            res.labels[a] = AnchorLabel::Positive;
            res.gt_index[a] = static_cast<int>(best_g);
        } else if (best >= neg_thr) {
            res.labels[a] = AnchorLabel::Ignore;
        }
    }

    // Forced coverage, ties toward the lowest anchor index.
    std::vector<bool> claimed(A, false);
    for (std::size_t a = 0; a < A; ++a)
        if (res.labels[a] == AnchorLabel::Positive) claimed[a] = true;
    std::vector<std::size_t> gt_order(gt.size());
    for (std::size_t g = 0; g < gt.size(); ++g) gt_order[g] = g;
    for (std::size_t g : gt_order) {
        // already covered by a thresholded positive?
        bool covered = false;
        for (std::size_t a = 0; a < A && !covered; ++a)
            covered = res.labels[a] == AnchorLabel::Positive &&
                      res.gt_index[a] == static_cast<int>(g);
        if (covered) continue;
        std::size_t best_a = A;
        double best = -1.0;
        for (std::size_t a = 0; a < A; ++a)
            if (!claimed[a] && m[a][g] > best) { best = m[a][g]; best_a = a; }
        if (best_a == A) continue;  // more GTs than anchors; cannot cover
        res.labels[best_a] = AnchorLabel::Positive;
        res.gt_index[best_a] = static_cast<int>(g);
        claimed[best_a] = true;
    }

    for (std::size_t a = 0; a < A; ++a)
        if (res.labels[a] == AnchorLabel::Positive) ++res.n_pos;
    return res;
}

}  // namespace ddet

#endif
