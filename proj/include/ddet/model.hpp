#ifndef DDET_MODEL_HPP
#define DDET_MODEL_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/anchors.hpp"
#include "ddet/box.hpp"
#include "ddet/graph.hpp"
#include "ddet/optim.hpp"
#include "ddet/rng.hpp"
#include "ddet/tensor.hpp"

namespace ddet {

// TinyNet: stem conv (stride 2) then three stages of two 3x3 convs, stride-2
// first conv per stage, channels 16/32/64, ReLU, no normalization layers.
// FPN laterals project each stage to feature_channels and the top-down path
// adds the 2x-upsampled coarser level. Heads are shared across levels.

inline constexpr double kClassPrior = 0.01;  // initial background score

struct ConvShape {
    std::string name;
    std::size_t out_ch, in_ch, k;
};

inline std::vector<ConvShape> detector_conv_shapes(const PyramidConfig& cfg) {
    std::size_t F = static_cast<std::size_t>(cfg.feature_channels);
    std::size_t A = static_cast<std::size_t>(cfg.anchors_per_cell());
    std::size_t K = static_cast<std::size_t>(cfg.num_classes);
    return {
        {"stem", 16, 3, 3},
        {"s1c1", 16, 16, 3}, {"s1c2", 16, 16, 3},
        {"s2c1", 32, 16, 3}, {"s2c2", 32, 32, 3},
        {"s3c1", 64, 32, 3}, {"s3c2", 64, 64, 3},
        {"lat1", F, 16, 1}, {"lat2", F, 32, 1}, {"lat3", F, 64, 1},
        {"cls_head", A * K, F, 3},
        {"reg_head", A * 4, F, 3},
    };
}

template <typename T>
ParamMap<T> init_detector_params(const PyramidConfig& cfg, std::uint64_t seed) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    ParamMap<T> params;
    for (const ConvShape& c : detector_conv_shapes(cfg)) {
        Tensor<T> w({c.out_ch, c.in_ch, c.k, c.k});
        bool head = c.name == "cls_head" || c.name == "reg_head";
        double fan_in = static_cast<double>(c.in_ch * c.k * c.k);
        double limit = head ? 0.01 : std::sqrt(6.0 / fan_in);
        for (T& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
        Tensor<T> b({c.out_ch}, T(0));
        if (c.name == "cls_head") {
            T prior = static_cast<T>(-std::log((1.0 - kClassPrior) / kClassPrior));
            for (T& v : b.data) v = prior;
        }
        params.emplace(c.name + ".w", std::move(w));
        params.emplace(c.name + ".b", std::move(b));
    }
    return params;
}

template <typename T>
struct DetectorNodes {
    std::map<std::string, int> param_ids;
    std::vector<int> features;  // one per pyramid level, finest first
    std::vector<int> cls;       // [N, Apc*K, Hl, Wl]
    std::vector<int> reg;       // [N, Apc*4, Hl, Wl]
};

template <typename T>
DetectorNodes<T> detector_forward(Graph<T>& g, const Tensor<T>& images,
                                  const ParamMap<T>& params, const PyramidConfig& cfg) {
    if (images.rank() != 4 || images.dim(1) != 3)
        throw std::invalid_argument("detector_forward: images must be [N,3,H,W]");
    if (images.dim(2) % cfg.max_stride() != 0 || images.dim(3) % cfg.max_stride() != 0)
        throw std::invalid_argument("detector_forward: image size not divisible by max stride");

    DetectorNodes<T> out;
    for (const auto& [name, t] : params)
        out.param_ids.emplace(name, g.leaf(t, name, true));
    auto p = [&](const std::string& n) {
        auto it = out.param_ids.find(n);
        if (it == out.param_ids.end())
            throw std::invalid_argument("detector_forward: missing parameter '" + n + "'");
        return it->second;
    };
    auto conv_relu = [&](int x, const std::string& n, int stride) {
        return g.relu(g.conv2d(x, p(n + ".w"), p(n + ".b"), stride, 1));
    };

    int x = g.leaf(images);
    int stem = conv_relu(x, "stem", 2);
    int c1 = conv_relu(conv_relu(stem, "s1c1", 2), "s1c2", 1);  // stride 4, 16ch
    int c2 = conv_relu(conv_relu(c1, "s2c1", 2), "s2c2", 1);    // stride 8, 32ch
    int c3 = conv_relu(conv_relu(c2, "s3c1", 2), "s3c2", 1);    // stride 16, 64ch

    int p3 = g.conv2d(c3, p("lat3.w"), p("lat3.b"), 1, 0);
    int p2 = g.add(g.conv2d(c2, p("lat2.w"), p("lat2.b"), 1, 0), g.upsample2x(p3));
    int p1 = g.add(g.conv2d(c1, p("lat1.w"), p("lat1.b"), 1, 0), g.upsample2x(p2));
    out.features = {p1, p2, p3};

    for (int f : out.features) {
        out.cls.push_back(g.conv2d(f, p("cls_head.w"), p("cls_head.b"), 1, 1));
        out.reg.push_back(g.conv2d(f, p("reg_head.w"), p("reg_head.b"), 1, 1));
    }
    return out;
}

// Full single-image inference: sigmoid scores, per-level top-k above the score
// threshold, decode, clip, class-wise NMS across levels, global cap.
template <typename T>
std::vector<Detection> predict(const ParamMap<T>& params, const Tensor<T>& image,
                               const PyramidConfig& cfg, double score_thr = 0.05,
                               std::size_t topk_per_level = 1000, double nms_iou = 0.5,
                               std::size_t max_detections = 100) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("predict: image must be [3,H,W]");
    const std::size_t H = image.dim(1), W = image.dim(2);
    Tensor<T> batch({1, 3, H, W}, image.data);
    Graph<T> g;
    DetectorNodes<T> nodes = detector_forward(g, batch, params, cfg);
    AnchorSet anchors = generate_anchors(H, W, cfg);

    const std::size_t K = static_cast<std::size_t>(cfg.num_classes);
    struct Cand {
        double score;
        std::size_t anchor;
        int cls;
        BoxDelta delta;
    };
    std::vector<Cand> cands;
    for (std::size_t li = 0; li < anchors.levels.size(); ++li) {
        const AnchorLevel& lv = anchors.levels[li];
        const Tensor<T>& co = g.value(nodes.cls[li]);
        const Tensor<T>& ro = g.value(nodes.reg[li]);
        std::size_t a0 = anchors.level_offset(li);
        std::vector<Cand> level;
        for (std::size_t ci = 0; ci < lv.grid_h; ++ci)
            for (std::size_t cj = 0; cj < lv.grid_w; ++cj)
                for (std::size_t a = 0; a < static_cast<std::size_t>(lv.anchors_per_cell); ++a) {
                    std::size_t ai = a0 + (ci * lv.grid_w + cj) * lv.anchors_per_cell + a;
                    BoxDelta d{
                        static_cast<double>(ro.at4(0, a * 4 + 0, ci, cj)),
                        static_cast<double>(ro.at4(0, a * 4 + 1, ci, cj)),
                        static_cast<double>(ro.at4(0, a * 4 + 2, ci, cj)),
                        static_cast<double>(ro.at4(0, a * 4 + 3, ci, cj)),
                    };
                    for (std::size_t k = 0; k < K; ++k) {
                        double s = Graph<T>::stable_sigmoid(co.at4(0, a * K + k, ci, cj));
                        if (s > score_thr)
                            level.push_back({s, ai, static_cast<int>(k), d});
                    }
                }
        if (level.size() > topk_per_level) {
            std::stable_sort(level.begin(), level.end(),
                             [](const Cand& a, const Cand& b) { return a.score > b.score; });
            level.resize(topk_per_level);
        }
        cands.insert(cands.end(), level.begin(), level.end());
    }

    std::vector<Detection> dets;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<Box> boxes;
        std::vector<double> scores;
        for (const Cand& c : cands)
            if (c.cls == static_cast<int>(k)) {
                boxes.push_back(decode_box(anchors.boxes[c.anchor], c.delta)
                                    .clipped(static_cast<double>(W), static_cast<double>(H)));
                scores.push_back(c.score);
            }
        for (std::size_t i : nms(boxes, scores, nms_iou, max_detections))
            dets.push_back({boxes[i], static_cast<int>(k), scores[i]});
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    if (dets.size() > max_detections) dets.resize(max_detections);
    return dets;
}

}  // namespace ddet

#endif
