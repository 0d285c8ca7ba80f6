#ifndef DDET_DIAGNOSTICS_HPP
#define DDET_DIAGNOSTICS_HPP

#include <vector>

#include "ddet/dataset.hpp"
#include "ddet/loss_cdf.hpp"
#include "ddet/model.hpp"

namespace ddet {

// Runs the detector over a corpus and collects one (logit, is_foreground)
// sample per non-ignored anchor/class pair — the population the CDF
// diagnostic sweeps gamma over.
inline std::vector<LogitSample> collect_logit_samples(const ParamMap<float>& params,
                                                      const std::vector<Sample>& samples,
                                                      const PyramidConfig& pcfg,
                                                      double pos_thr = 0.5,
                                                      double neg_thr = 0.4) {
    std::vector<LogitSample> out;
    const std::size_t K = static_cast<std::size_t>(pcfg.num_classes);
    for (const Sample& s : samples) {
        const std::size_t H = s.height(), W = s.width();
        Tensorf batch({1, 3, H, W}, s.image.data);
        Graph<float> g;
        DetectorNodes<float> nodes = detector_forward(g, batch, params, pcfg);
        AnchorSet anchors = generate_anchors(H, W, pcfg);
        std::vector<GtObject> gt;
        for (const AnnotatedObject& o : s.gt.objects) gt.push_back({o.box, o.class_id});
        MatchResult m = match_anchors(anchors, gt, pos_thr, neg_thr);
        for (std::size_t li = 0, a0 = 0; li < anchors.levels.size(); ++li) {
            const AnchorLevel& lv = anchors.levels[li];
            const Tensorf& cls = g.value(nodes.cls[li]);
            std::size_t cells = lv.grid_h * lv.grid_w;
            for (std::size_t cell = 0; cell < cells; ++cell)
                for (std::size_t a = 0; a < static_cast<std::size_t>(lv.anchors_per_cell); ++a) {
                    std::size_t ai = a0 + cell * lv.anchors_per_cell + a;
                    if (m.labels[ai] == AnchorLabel::Ignore) continue;
                    bool pos = m.labels[ai] == AnchorLabel::Positive;
                    int gt_cls = pos ? gt[static_cast<std::size_t>(m.gt_index[ai])].class_id : -1;
                    for (std::size_t k = 0; k < K; ++k) {
                        double z = cls.at4(0, a * K + k, cell / lv.grid_w, cell % lv.grid_w);
                        out.push_back({z, static_cast<int>(k) == gt_cls});
                    }
                }
            a0 += cells * lv.anchors_per_cell;
        }
    }
    return out;
}

}  // namespace ddet

#endif
