#ifndef DDET_LOSSES_HPP
#define DDET_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ddet/anchors.hpp"
#include "ddet/graph.hpp"
#include "ddet/tensor.hpp"

namespace ddet {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Binary cross-entropy from the logit (alpha_t == 1, gamma == 0 case).
inline double binary_ce(double logit, bool is_foreground) {
    return is_foreground ? softplus(-logit) : softplus(logit);
}

// FL(p_t) = -alpha_t (1 - p_t)^gamma ln(p_t), p_t = p for foreground and
// 1-p for background, alpha_t = alpha (foreground) or 1-alpha (background).
// Computed from the logit:
//   foreground: alpha   * sigmoid(-z)^gamma * softplus(-z)
//   background: (1-a)   * sigmoid(+z)^gamma * softplus(+z)
inline double focal_loss(double logit, bool is_foreground, double gamma, double alpha) {
    if (!std::isfinite(logit)) throw std::invalid_argument("focal_loss: non-finite logit");
    double z = is_foreground ? logit : -logit;
    double a = is_foreground ? alpha : 1.0 - alpha;
    double one_minus_pt = sigmoid(-z);
    double mod = gamma == 0.0 ? 1.0 : std::pow(one_minus_pt, gamma);
    return a * mod * softplus(-z);
}

// d focal / d logit. With p = sigmoid(z), q = 1-p, ln p = -softplus(-z):
//   foreground: alpha * (gamma q^gamma p ln p - q^(gamma+1))
//   background: mirror image with z -> -z and sign flipped.
inline double focal_loss_grad(double logit, bool is_foreground, double gamma, double alpha) {
    double z = is_foreground ? logit : -logit;
    double a = is_foreground ? alpha : 1.0 - alpha;
    double p = sigmoid(z);
    double q = sigmoid(-z);
    double lnp = -softplus(-z);
    double qg = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    double d = a * (gamma * qg * p * lnp - qg * q);
    return is_foreground ? d : -d;
}

// Same pair for plain CE, used by the mining path and the gamma=0 reduction.
inline double binary_ce_grad(double logit, bool is_foreground) {
    double p = sigmoid(logit);
    return is_foreground ? p - 1.0 : p;
}

inline double smooth_l1(double x, double beta = 1.0) {
    if (beta <= 0) throw std::invalid_argument("smooth_l1: beta must be > 0");
    double ax = std::abs(x);
    return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
}

inline double smooth_l1_grad(double x, double beta = 1.0) {
    double ax = std::abs(x);
    return ax < beta ? x / beta : (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
}

enum class ClsMode { Focal, HardNegativeCe, PlainCe };

struct PerAnchorLoss {
    std::size_t anchor;   // image-major flat index over the batch
    bool is_foreground;
    double loss;
};

struct LossReport {
    double total = 0;
    double cls = 0;
    double reg = 0;
    std::size_t n_pos = 0;
    std::vector<PerAnchorLoss> per_anchor_cls_loss;
};

// Select the negatives kept by SSD-style mining: top ratio*n_pos by per-anchor
// loss, ties toward the lower index; exactly one hardest negative if n_pos==0.
inline std::vector<std::size_t> mine_negatives(const std::vector<double>& neg_losses,
                                               const std::vector<std::size_t>& neg_indices,
                                               std::size_t n_pos, int neg_pos_ratio) {
    if (neg_pos_ratio < 1) throw std::invalid_argument("mine_negatives: ratio must be >= 1");
    std::size_t keep = n_pos == 0 ? 1 : n_pos * static_cast<std::size_t>(neg_pos_ratio);
    keep = std::min(keep, neg_indices.size());
    std::vector<std::size_t> order(neg_indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return neg_losses[a] > neg_losses[b]; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < keep; ++i) out.push_back(neg_indices[order[i]]);
    std::sort(out.begin(), out.end());
    return out;
}

// Single-image mined-CE classification loss over per-anchor logits (A x K,
// row-major). Returns the cls value normalized by max(1, n_pos) and fills the
// per-anchor breakdown.
inline double ce_hard_negative_loss(const std::vector<double>& logits, std::size_t num_classes,
                                    const MatchResult& matches, const std::vector<GtObject>& gt,
                                    int neg_pos_ratio, std::vector<PerAnchorLoss>* breakdown = nullptr) {
    const std::size_t A = matches.labels.size();
    if (logits.size() != A * num_classes)
        throw std::invalid_argument("ce_hard_negative_loss: logits size mismatch");
    std::vector<double> anchor_loss(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
        if (matches.labels[a] == AnchorLabel::Ignore) continue;
        int cls = matches.labels[a] == AnchorLabel::Positive
                      ? gt[static_cast<std::size_t>(matches.gt_index[a])].class_id
                      : -1;
        for (std::size_t k = 0; k < num_classes; ++k)
            anchor_loss[a] += binary_ce(logits[a * num_classes + k],
                                        static_cast<int>(k) == cls);
    }
    std::vector<double> neg_losses;
    std::vector<std::size_t> neg_indices;
    for (std::size_t a = 0; a < A; ++a)
        if (matches.labels[a] == AnchorLabel::Negative) {
            neg_losses.push_back(anchor_loss[a]);
            neg_indices.push_back(a);
        }
    std::vector<std::size_t> kept = mine_negatives(neg_losses, neg_indices, matches.n_pos,
                                                   neg_pos_ratio);
    double sum = 0;
    auto count = [&](std::size_t a, bool fg) {
        sum += anchor_loss[a];
        if (breakdown) breakdown->push_back({a, fg, anchor_loss[a]});
    };
    for (std::size_t a = 0; a < A; ++a)
        if (matches.labels[a] == AnchorLabel::Positive) count(a, true);
    for (std::size_t a : kept) count(a, false);
    return sum / static_cast<double>(std::max<std::size_t>(1, matches.n_pos));
}

// Everything the batched detection loss needs besides the head outputs.
struct DetectionLossSpec {
    const AnchorSet* anchors = nullptr;
    std::vector<std::vector<GtObject>> gts;     // per image
    std::vector<MatchResult> matches;           // per image
    ClsMode mode = ClsMode::Focal;
    double gamma = 2.0;
    double alpha = 0.25;
    double beta = 1.0;
    int neg_pos_ratio = 3;
    std::size_t num_classes = 3;
};

namespace detail {

// Logit/delta position inside a head output tensor [N, Apc*K, H, W] for the
// anchor at (cell, a) matching the canonical anchor order.
inline std::size_t head_offset(std::size_t n, std::size_t channels, std::size_t H, std::size_t W,
                               std::size_t cell, std::size_t a, std::size_t per_anchor,
                               std::size_t k) {
    std::size_t ci = cell / W, cj = cell % W;
    std::size_t ch = a * per_anchor + k;
    return ((n * channels + ch) * H + ci) * W + cj;
}

}  // namespace detail

// Batched detection loss as a graph node. cls_nodes/reg_nodes hold one head
// output per pyramid level; gradients w.r.t. both are analytic and checked
// against finite differences in the tests.
template <typename T>
int detection_loss_node(Graph<T>& g, const std::vector<int>& cls_nodes,
                        const std::vector<int>& reg_nodes, const DetectionLossSpec& spec,
                        LossReport* report_out = nullptr) {
    if (cls_nodes.size() != spec.anchors->levels.size() || reg_nodes.size() != cls_nodes.size())
        throw std::invalid_argument("detection_loss: one cls and reg node per level required");
    std::vector<int> inputs = cls_nodes;
    inputs.insert(inputs.end(), reg_nodes.begin(), reg_nodes.end());
    const DetectionLossSpec s = spec;  // captured by value
    auto fn = [s, report_out](const std::vector<const Tensor<T>*>& ins,
                              std::vector<Tensor<T>>& grads) -> T {
        const AnchorSet& anchors = *s.anchors;
        const std::size_t L = anchors.levels.size();
        const std::size_t N = ins[0]->dim(0);
        const std::size_t K = s.num_classes;
        if (s.gts.size() != N || s.matches.size() != N)
            throw std::invalid_argument("detection_loss: batch size mismatch");
        grads.clear();
        for (const Tensor<T>* t : ins) grads.emplace_back(t->shape, T(0));

        std::size_t total_pos = 0;
        for (const MatchResult& m : s.matches) total_pos += m.n_pos;
        const double norm = static_cast<double>(std::max<std::size_t>(1, total_pos));

        LossReport rep;
        rep.n_pos = total_pos;
        double cls_sum = 0, reg_sum = 0;
        const std::size_t A = anchors.boxes.size();

        for (std::size_t n = 0; n < N; ++n) {
            const MatchResult& m = s.matches[n];
            const std::vector<GtObject>& gt = s.gts[n];

            // mined negative set for this image (HardNegativeCe only)
            std::vector<bool> counted(A, false);
            if (s.mode == ClsMode::HardNegativeCe) {
                std::vector<double> neg_losses;
                std::vector<std::size_t> neg_indices;
                for (std::size_t li = 0, a0 = 0; li < L; ++li) {
                    const AnchorLevel& lv = anchors.levels[li];
                    const Tensor<T>& cls = *ins[li];
                    std::size_t cells = lv.grid_h * lv.grid_w;
                    for (std::size_t cell = 0; cell < cells; ++cell)
                        for (std::size_t a = 0; a < static_cast<std::size_t>(lv.anchors_per_cell); ++a) {
                            std::size_t ai = a0 + cell * lv.anchors_per_cell + a;
                            if (m.labels[ai] != AnchorLabel::Negative) continue;
                            double al = 0;
                            for (std::size_t k = 0; k < K; ++k) {
                                double z = cls.data[detail::head_offset(
                                    n, cls.dim(1), lv.grid_h, lv.grid_w, cell, a, K, k)];
                                al += binary_ce(z, false);
                            }
                            neg_losses.push_back(al);
                            neg_indices.push_back(ai);
                        }
                    a0 += cells * lv.anchors_per_cell;
                }
                for (std::size_t ai :
                     mine_negatives(neg_losses, neg_indices, m.n_pos, s.neg_pos_ratio))
                    counted[ai] = true;
            }

            for (std::size_t li = 0, a0 = 0; li < L; ++li) {
                const AnchorLevel& lv = anchors.levels[li];
                const Tensor<T>& cls = *ins[li];
                const Tensor<T>& reg = *ins[L + li];
                Tensor<T>& gcls = grads[li];
                Tensor<T>& greg = grads[L + li];
                std::size_t cells = lv.grid_h * lv.grid_w;
                for (std::size_t cell = 0; cell < cells; ++cell)
                    for (std::size_t a = 0; a < static_cast<std::size_t>(lv.anchors_per_cell); ++a) {
                        std::size_t ai = a0 + cell * lv.anchors_per_cell + a;
                        AnchorLabel lab = m.labels[ai];
                        if (lab == AnchorLabel::Ignore) continue;
                        bool pos = lab == AnchorLabel::Positive;
                        int gt_cls = pos ? gt[static_cast<std::size_t>(m.gt_index[ai])].class_id : -1;
                        bool count_cls = s.mode != ClsMode::HardNegativeCe || pos || counted[ai];
                        if (count_cls) {
                            double anchor_loss = 0;
                            for (std::size_t k = 0; k < K; ++k) {
                                std::size_t off = detail::head_offset(
                                    n, cls.dim(1), lv.grid_h, lv.grid_w, cell, a, K, k);
                                double z = cls.data[off];
                                bool fg = static_cast<int>(k) == gt_cls;
                                double lv_, gv;
                                if (s.mode == ClsMode::Focal) {
                                    lv_ = focal_loss(z, fg, s.gamma, s.alpha);
                                    gv = focal_loss_grad(z, fg, s.gamma, s.alpha);
                                } else {
                                    lv_ = binary_ce(z, fg);
                                    gv = binary_ce_grad(z, fg);
                                }
                                anchor_loss += lv_;
                                gcls.data[off] += static_cast<T>(gv / norm);
                            }
                            cls_sum += anchor_loss;
                            rep.per_anchor_cls_loss.push_back({n * A + ai, pos, anchor_loss});
                        }
                        if (pos) {
                            BoxDelta t = encode_box(anchors.boxes[ai],
                                                    gt[static_cast<std::size_t>(m.gt_index[ai])].box);
                            double tv[4] = {t.tx, t.ty, t.tw, t.th};
                            for (std::size_t d = 0; d < 4; ++d) {
                                std::size_t off = detail::head_offset(
                                    n, reg.dim(1), lv.grid_h, lv.grid_w, cell, a, 4, d);
                                double x = static_cast<double>(reg.data[off]) - tv[d];
                                reg_sum += smooth_l1(x, s.beta);
                                greg.data[off] += static_cast<T>(smooth_l1_grad(x, s.beta) / norm);
                            }
                        }
                    }
                a0 += cells * lv.anchors_per_cell;
            }
        }

        rep.cls = cls_sum / norm;
        rep.reg = reg_sum / norm;
        rep.total = rep.cls + rep.reg;
        if (report_out) *report_out = rep;
        return static_cast<T>(rep.total);
    };
    return g.custom_scalar(std::move(inputs), std::move(fn));
}

}  // namespace ddet

#endif
