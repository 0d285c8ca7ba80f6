#ifndef DDET_TRAIN_HPP
#define DDET_TRAIN_HPP

#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "ddet/config.hpp"
#include "ddet/dataset.hpp"
#include "ddet/losses.hpp"
#include "ddet/model.hpp"
#include "ddet/optim.hpp"
#include "ddet/rng.hpp"

namespace ddet {

struct StepLog {
    int step;
    LossReport report;
};

// Full training loop: seeded shuffle -> horizontal flip augmentation ->
// forward -> detection loss -> backward -> SGD step. Deterministic for a
// fixed config and seed. Logs one CSV row every `log_every` steps.
inline ParamMap<float> train_detector(const std::vector<Sample>& samples,
                                      const PyramidConfig& pcfg, const RunConfig& cfg,
                                      std::ostream* loss_log = nullptr, int log_every = 10,
                                      const std::function<void(const StepLog&)>& on_step = {}) {
    if (samples.empty()) throw std::invalid_argument("train_detector: empty training set");
    const std::size_t H = samples[0].height(), W = samples[0].width();
    for (const Sample& s : samples)
        if (s.height() != H || s.width() != W)
            throw std::invalid_argument("train_detector: all images must share one size");

    cfg.validate();
    const std::size_t B = static_cast<std::size_t>(cfg.optim.batch_size);
    Rng rng(cfg.seed);
    ParamMap<float> params = init_detector_params<float>(pcfg, cfg.seed);
    ParamMap<float> velocity;
    AnchorSet anchors = generate_anchors(H, W, pcfg);

    if (loss_log) *loss_log << "step,total,cls,reg,n_pos\n";

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    auto next_index = [&]() {
        if (cursor >= order.size()) {
            order.resize(samples.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
            cursor = 0;
        }
        return order[cursor++];
    };

    for (int step = 1; step <= cfg.optim.steps; ++step) {
        Tensorf batch({B, 3, H, W});
        DetectionLossSpec spec;
        spec.anchors = &anchors;
        spec.mode = cfg.mode();
        spec.gamma = cfg.mode() == ClsMode::Focal ? cfg.gamma : 0.0;
        spec.alpha = cfg.alpha;
        spec.beta = cfg.beta;
        spec.neg_pos_ratio = cfg.neg_pos_ratio;
        spec.num_classes = static_cast<std::size_t>(pcfg.num_classes);
        for (std::size_t b = 0; b < B; ++b) {
            Sample s = augment_hflip(samples[next_index()], 0.5, rng);
            std::copy(s.image.data.begin(), s.image.data.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(b * 3 * H * W));
            std::vector<GtObject> gt;
            for (const AnnotatedObject& o : s.gt.objects) gt.push_back({o.box, o.class_id});
            spec.matches.push_back(match_anchors(anchors, gt, cfg.pos_thr, cfg.neg_thr));
            spec.gts.push_back(std::move(gt));
        }

        Graph<float> g;
        DetectorNodes<float> nodes = detector_forward(g, batch, params, pcfg);
        LossReport report;
        int loss = detection_loss_node(g, nodes.cls, nodes.reg, spec, &report);
        g.backward(loss);

        ParamMap<float> grads;
        for (const auto& [name, id] : nodes.param_ids) grads.emplace(name, g.gradient(id));

        double lr = cfg.optim.learning_rate;
        if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
            lr *= static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
        sgd_step(params, grads, velocity, cfg.optim, lr);

        if (loss_log && step % log_every == 0) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%zu\n", step, report.total,
                          report.cls, report.reg, report.n_pos);
            *loss_log << buf;
        }
        if (on_step) on_step({step, report});
    }
    return params;
}

}  // namespace ddet

#endif
