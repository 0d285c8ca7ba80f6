#ifndef DDET_BOX_HPP
#define DDET_BOX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ddet {

// Axis-aligned pixel rectangle, closed intervals: width = x2-x1.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }
    double area() const { return w() * h(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool valid() const { return x2 >= x1 && y2 >= y1; }

    Box clipped(double img_w, double img_h) const {
        return {std::clamp(x1, 0.0, img_w), std::clamp(y1, 0.0, img_h),
                std::clamp(x2, 0.0, img_w), std::clamp(y2, 0.0, img_h)};
    }
};

inline double iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

inline std::vector<std::vector<double>> iou_matrix(const std::vector<Box>& as,
                                                   const std::vector<Box>& bs) {
    std::vector<std::vector<double>> m(as.size(), std::vector<double>(bs.size()));
    for (std::size_t i = 0; i < as.size(); ++i)
        for (std::size_t j = 0; j < bs.size(); ++j) m[i][j] = iou(as[i], bs[j]);
    return m;
}

struct BoxDelta {
    double tx = 0, ty = 0, tw = 0, th = 0;
};

// tx=(xg-xa)/wa, ty=(yg-ya)/ha, tw=ln(wg/wa), th=ln(hg/ha) on centers/sizes.
inline BoxDelta encode_box(const Box& anchor, const Box& gt) {
    if (anchor.w() <= 0 || anchor.h() <= 0)
        throw std::invalid_argument("encode_box: anchor has non-positive size");
    if (gt.w() <= 0 || gt.h() <= 0)
        throw std::invalid_argument("encode_box: ground-truth box has non-positive size");
    return {(gt.cx() - anchor.cx()) / anchor.w(), (gt.cy() - anchor.cy()) / anchor.h(),
            std::log(gt.w() / anchor.w()), std::log(gt.h() / anchor.h())};
}

inline Box decode_box(const Box& anchor, const BoxDelta& d) {
    double cx = anchor.cx() + d.tx * anchor.w();
    double cy = anchor.cy() + d.ty * anchor.h();
    double w = anchor.w() * std::exp(d.tw);
    double h = anchor.h() * std::exp(d.th);
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

// Greedy NMS: keep the highest-score remaining box, suppress everything with
// IoU strictly above iou_thr against it. Ties break toward the lower index.
inline std::vector<std::size_t> nms(const std::vector<Box>& boxes,
                                    const std::vector<double>& scores,
                                    double iou_thr = 0.5, std::size_t max_out = 100) {
    if (boxes.size() != scores.size())
        throw std::invalid_argument("nms: boxes and scores must be equal length");
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    std::vector<bool> suppressed(boxes.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t oi = 0; oi < order.size() && kept.size() < max_out; ++oi) {
        std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(i);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            std::size_t j = order[oj];
            if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_thr) suppressed[j] = true;
        }
    }
    return kept;
}

struct Detection {
    Box box;
    int class_id = 0;
    double score = 0;
};

}  // namespace ddet

#endif
