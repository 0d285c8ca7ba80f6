#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddet/anchors.hpp"
#include "ddet/loss_cdf.hpp"
#include "ddet/losses.hpp"
#include "ddet/rng.hpp"

using namespace ddet;

namespace {

// Seeded two-population logit set mimicking a detector mid-training: abundant
// easy background, scarce foreground.
std::vector<LogitSample> synthetic_population(std::size_t n_bg = 10000, std::size_t n_fg = 100,
                                              std::uint64_t seed = 77) {
    Rng rng(seed);
    std::vector<LogitSample> pop;
    for (std::size_t i = 0; i < n_bg; ++i) pop.push_back({-4.0 + 2.0 * rng.normal(), false});
    for (std::size_t i = 0; i < n_fg; ++i) pop.push_back({0.5 + 0.3 * rng.normal(), true});
    return pop;
}

const CdfCurve& find_curve(const std::vector<CdfCurve>& cs, const std::string& pop, double gamma) {
    for (const CdfCurve& c : cs)
        if (c.population == pop && c.gamma == gamma) return c;
    FAIL("curve not found");
    return cs.front();
}

}  // namespace

TEST_CASE("focal loss point values") {
    SECTION("saturated foreground logit gives ~0 loss") {
        CHECK(focal_loss(30.0, true, 2.0, 0.25) < 1e-24);
    }
    SECTION("gamma=0, alpha_t==1, p_t=0.5 gives ln 2") {
        // alpha=0.5 halves both branches; doubling recovers the unweighted CE
        CHECK(2.0 * focal_loss(0.0, true, 0.0, 0.5) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(binary_ce(0.0, true) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SECTION("gamma=2, alpha=0.25, foreground, p_t=0.9") {
        double logit = std::log(0.9 / 0.1);
        double expected = 0.25 * 0.01 * (-std::log(0.9));  // 2.63401e-4
        CHECK(focal_loss(logit, true, 2.0, 0.25) == Catch::Approx(expected).margin(1e-9));
        CHECK(std::abs(focal_loss(logit, true, 2.0, 0.25) - 2.63401e-4) < 1e-9);
    }
    SECTION("non-finite logit is an error") {
        CHECK_THROWS_AS(focal_loss(std::nan(""), true, 2.0, 0.25), std::invalid_argument);
    }
}

TEST_CASE("focal loss reductions and stability") {
    SECTION("gamma=0 / alpha_t==1 equals binary CE within 1e-12 over [-30,30]") {
        for (double z = -30.0; z <= 30.0; z += 0.25)
            for (bool fg : {true, false}) {
                double reduced = 2.0 * focal_loss(z, fg, 0.0, 0.5);
                // independent high-precision route: p_t without cancellation
                long double zt = fg ? z : -z;
                long double pt = 1.0L / (1.0L + std::exp(-zt));
                if (pt > 1e-14L) {
                    CHECK(std::abs(reduced - static_cast<double>(-std::log(pt))) < 1e-9);
                }
                CHECK(std::abs(reduced - binary_ce(z, fg)) < 1e-12);
            }
    }
    SECTION("monotone non-increasing in p_t for foreground; finite at |logit|=30") {
        double prev = std::numeric_limits<double>::infinity();
        for (double z = -30.0; z <= 30.0; z += 0.1) {
            double l = focal_loss(z, true, 2.0, 0.25);
            CHECK(std::isfinite(l));
            CHECK(l <= prev + 1e-15);
            prev = l;
        }
        CHECK(std::isfinite(focal_loss(-30.0, false, 2.0, 0.25)));
        CHECK(std::isfinite(focal_loss(30.0, false, 2.0, 0.25)));
    }
    SECTION("analytic gradient matches central differences") {
        Rng rng(5);
        for (int i = 0; i < 50; ++i) {
            double z = rng.uniform(-8, 8);
            double gamma = rng.uniform(0, 4);
            bool fg = rng.bernoulli(0.5);
            double eps = 1e-6;
            double num = (focal_loss(z + eps, fg, gamma, 0.25) -
                          focal_loss(z - eps, fg, gamma, 0.25)) /
                         (2 * eps);
            double ana = focal_loss_grad(z, fg, gamma, 0.25);
            CHECK(std::abs(num - ana) <= 1e-4 * std::max({std::abs(num), std::abs(ana), 1e-6}));
        }
    }
}

TEST_CASE("smooth L1") {
    CHECK(smooth_l1(0.0) == 0.0);
    CHECK(smooth_l1(0.5, 1.0) == Catch::Approx(0.125));
    CHECK(smooth_l1(2.0, 1.0) == Catch::Approx(1.5));
    CHECK_THROWS_AS(smooth_l1(1.0, 0.0), std::invalid_argument);
    SECTION("C1 continuity at |x| = beta") {
        double beta = 0.7, eps = 1e-9;
        CHECK(std::abs(smooth_l1(beta - eps, beta) - smooth_l1(beta + eps, beta)) < 1e-8);
        CHECK(std::abs(smooth_l1_grad(beta - eps, beta) - smooth_l1_grad(beta + eps, beta)) < 1e-8);
    }
}

TEST_CASE("hard negative mining") {
    PyramidConfig pc;
    pc.strides = {16};
    pc.base_sizes = {16};
    pc.scales = {1.0};
    pc.ratios = {1.0};
    AnchorSet anchors = generate_anchors(16, 16 * 11, pc);  // 11 anchors in a row
    REQUIRE(anchors.boxes.size() == 11);

    SECTION("1 positive, 10 equal-loss negatives, ratio 3 -> 3 lowest indices") {
        std::vector<GtObject> gt = {{anchors.boxes[0], 0}};
        MatchResult m = match_anchors(anchors, gt);
        REQUIRE(m.n_pos == 1);
        std::vector<double> logits(11, 0.0);  // all equal loss
        std::vector<PerAnchorLoss> breakdown;
        ce_hard_negative_loss(logits, 1, m, gt, 3, &breakdown);
        std::vector<std::size_t> counted_negs;
        for (const PerAnchorLoss& p : breakdown)
            if (!p.is_foreground) counted_negs.push_back(p.anchor);
        CHECK(counted_negs == std::vector<std::size_t>{1, 2, 3});
    }
    SECTION("n_pos = 0 keeps exactly the single hardest negative, normalized by 1") {
        MatchResult m;
        m.labels.assign(11, AnchorLabel::Negative);
        m.gt_index.assign(11, -1);
        std::vector<double> logits(11, -2.0);
        logits[7] = 3.0;  // hardest background
        std::vector<PerAnchorLoss> breakdown;
        double cls = ce_hard_negative_loss(logits, 1, m, {}, 3, &breakdown);
        REQUIRE(breakdown.size() == 1);
        CHECK(breakdown[0].anchor == 7);
        CHECK(cls == Catch::Approx(binary_ce(3.0, false)));
    }
    SECTION("matches a full-sort oracle exactly on random instances") {
        Rng rng(55);
        for (int trial = 0; trial < 200; ++trial) {
            std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 40));
            std::size_t n_pos = static_cast<std::size_t>(rng.uniform_int(0, 3));
            int ratio = static_cast<int>(rng.uniform_int(1, 4));
            std::vector<double> losses(n);
            std::vector<std::size_t> indices(n);
            for (std::size_t i = 0; i < n; ++i) {
                losses[i] = rng.uniform_int(0, 6) / 3.0;  // ties likely
                indices[i] = i * 2;                       // arbitrary ids
            }
            // oracle: sort (loss desc, index asc), take the prefix
            std::vector<std::size_t> ord(n);
            std::iota(ord.begin(), ord.end(), 0);
            std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
                if (losses[a] != losses[b]) return losses[a] > losses[b];
                return indices[a] < indices[b];
            });
            std::size_t keep = std::min<std::size_t>(n, n_pos == 0 ? 1 : n_pos * ratio);
            std::vector<std::size_t> want;
            for (std::size_t i = 0; i < keep; ++i) want.push_back(indices[ord[i]]);
            std::sort(want.begin(), want.end());
            REQUIRE(mine_negatives(losses, indices, n_pos, ratio) == want);
        }
    }
}

namespace {

struct LossScenario {
    PyramidConfig pcfg;
    AnchorSet anchors;
    DetectionLossSpec spec;
    std::vector<std::size_t> cls_shape(std::size_t li) const {
        const AnchorLevel& lv = anchors.levels[li];
        return {1, static_cast<std::size_t>(lv.anchors_per_cell) * spec.num_classes, lv.grid_h,
                lv.grid_w};
    }
    std::vector<std::size_t> reg_shape(std::size_t li) const {
        const AnchorLevel& lv = anchors.levels[li];
        return {1, static_cast<std::size_t>(lv.anchors_per_cell) * 4, lv.grid_h, lv.grid_w};
    }
};

LossScenario make_scenario(ClsMode mode, const std::vector<GtObject>& gt) {
    LossScenario s;
    s.pcfg.num_classes = 2;
    s.anchors = generate_anchors(32, 32, s.pcfg);
    s.spec.anchors = &s.anchors;
    s.spec.mode = mode;
    s.spec.num_classes = 2;
    s.spec.gts = {gt};
    s.spec.matches = {match_anchors(s.anchors, gt)};
    return s;
}

double eval_loss(const LossScenario& s, const std::vector<Tensord>& leaves,
                 LossReport* rep = nullptr, std::vector<Tensord>* grads = nullptr) {
    Graph<double> g;
    std::vector<int> cls_nodes, reg_nodes;
    for (std::size_t li = 0; li < 3; ++li) cls_nodes.push_back(g.leaf(leaves[li], "", true));
    for (std::size_t li = 0; li < 3; ++li) reg_nodes.push_back(g.leaf(leaves[3 + li], "", true));
    LossReport local;
    int loss = detection_loss_node(g, cls_nodes, reg_nodes, s.spec, &local);
    if (rep) *rep = local;
    if (grads) {
        g.backward(loss);
        grads->clear();
        for (int id : cls_nodes) grads->push_back(g.gradient(id));
        for (int id : reg_nodes) grads->push_back(g.gradient(id));
    }
    return g.value(loss).data[0];
}

std::vector<Tensord> random_heads(const LossScenario& s, Rng& rng, double scale = 2.0) {
    std::vector<Tensord> leaves;
    for (std::size_t li = 0; li < 3; ++li) {
        Tensord t(s.cls_shape(li));
        for (double& v : t.data) v = rng.uniform(-scale, scale);
        leaves.push_back(std::move(t));
    }
    for (std::size_t li = 0; li < 3; ++li) {
        Tensord t(s.reg_shape(li));
        for (double& v : t.data) v = rng.uniform(-scale, scale);
        leaves.push_back(std::move(t));
    }
    return leaves;
}

}  // namespace

TEST_CASE("detection loss") {
    SECTION("no GT: reg term is zero, cls is background-only") {
        LossScenario s = make_scenario(ClsMode::Focal, {});
        Rng rng(61);
        LossReport rep;
        eval_loss(s, random_heads(s, rng), &rep);
        CHECK(rep.reg == 0.0);
        CHECK(rep.cls > 0.0);
        CHECK(rep.n_pos == 0);
        CHECK(rep.total == Catch::Approx(rep.cls + rep.reg));
    }
    SECTION("perfect logits and perfect regression give ~0 total") {
        PyramidConfig pc;
        pc.num_classes = 2;
        AnchorSet anchors = generate_anchors(32, 32, pc);
        std::vector<GtObject> gt = {{anchors.boxes[40], 1}};
        LossScenario s = make_scenario(ClsMode::Focal, gt);
        std::vector<Tensord> leaves;
        const MatchResult& m = s.spec.matches[0];
        for (std::size_t li = 0, a0 = 0; li < 3; ++li) {
            const AnchorLevel& lv = s.anchors.levels[li];
            Tensord t(s.cls_shape(li), -30.0);
            std::size_t cells = lv.grid_h * lv.grid_w;
            for (std::size_t cell = 0; cell < cells; ++cell)
                for (std::size_t a = 0; a < 9; ++a) {
                    std::size_t ai = a0 + cell * 9 + a;
                    if (m.labels[ai] == AnchorLabel::Positive)
                        t.at4(0, a * 2 + 1, cell / lv.grid_w, cell % lv.grid_w) = 30.0;
                }
            a0 += cells * 9;
            leaves.push_back(std::move(t));
        }
        // every positive anchor regresses exactly onto its assigned GT
        for (std::size_t li = 0, a0 = 0; li < 3; ++li) {
            const AnchorLevel& lv = s.anchors.levels[li];
            Tensord t(s.reg_shape(li), 0.0);
            std::size_t cells = lv.grid_h * lv.grid_w;
            for (std::size_t cell = 0; cell < cells; ++cell)
                for (std::size_t a = 0; a < 9; ++a) {
                    std::size_t ai = a0 + cell * 9 + a;
                    if (m.labels[ai] != AnchorLabel::Positive) continue;
                    BoxDelta d = encode_box(s.anchors.boxes[ai],
                                            gt[static_cast<std::size_t>(m.gt_index[ai])].box);
                    double dv[4] = {d.tx, d.ty, d.tw, d.th};
                    for (std::size_t k = 0; k < 4; ++k)
                        t.at4(0, a * 4 + k, cell / lv.grid_w, cell % lv.grid_w) = dv[k];
                }
            a0 += cells * 9;
            leaves.push_back(std::move(t));
        }
        LossReport rep;
        double total = eval_loss(s, leaves, &rep);
        CHECK(total < 1e-6);
        CHECK(rep.n_pos >= 1);
    }
    SECTION("LossReport invariants") {
        Rng rng(67);
        for (ClsMode mode : {ClsMode::Focal, ClsMode::HardNegativeCe, ClsMode::PlainCe}) {
            std::vector<GtObject> gt = {{Box{4, 4, 20, 20}, 0}, {Box{18, 6, 30, 28}, 1}};
            LossScenario s = make_scenario(mode, gt);
            LossReport rep;
            eval_loss(s, random_heads(s, rng), &rep);
            CHECK(rep.total == Catch::Approx(rep.cls + rep.reg));
            double sum = 0;
            for (const PerAnchorLoss& p : rep.per_anchor_cls_loss) {
                CHECK(p.loss >= 0.0);
                sum += p.loss;
            }
            CHECK(sum / std::max<std::size_t>(1, rep.n_pos) == Catch::Approx(rep.cls).margin(1e-6));
        }
    }
    SECTION("gradients match finite differences in both modes") {
        Rng rng(71);
        for (ClsMode mode : {ClsMode::Focal, ClsMode::HardNegativeCe}) {
            std::vector<GtObject> gt = {{Box{4, 4, 20, 20}, 0}, {Box{16, 10, 30, 26}, 1}};
            LossScenario s = make_scenario(mode, gt);
            std::vector<Tensord> leaves = random_heads(s, rng);
            std::vector<Tensord> analytic;
            eval_loss(s, leaves, nullptr, &analytic);
            double eps = 1e-5;
            int probes = 0;
            for (std::size_t li = 0; li < leaves.size(); ++li)
                for (int p = 0; p < 6; ++p) {
                    std::size_t i = static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(leaves[li].numel()) - 1));
                    std::vector<Tensord> plus = leaves, minus = leaves;
                    plus[li].data[i] += eps;
                    minus[li].data[i] -= eps;
                    double num = (eval_loss(s, plus) - eval_loss(s, minus)) / (2 * eps);
                    double ana = analytic[li].data[i];
                    REQUIRE(std::abs(num - ana) <=
                            1e-4 * std::max({std::abs(num), std::abs(ana), 1e-6}));
                    ++probes;
                }
            CHECK(probes >= 20);
        }
    }
}

TEST_CASE("loss_cdf") {
    SECTION("uniform losses") {
        auto pts = loss_cdf({1, 1, 1, 1});
        REQUIRE(pts.size() == 4);
        CHECK(pts[0] == std::pair{0.25, 0.25});
        CHECK(pts[1] == std::pair{0.5, 0.5});
        CHECK(pts[2] == std::pair{0.75, 0.75});
        CHECK(pts[3] == std::pair{1.0, 1.0});
    }
    SECTION("[1,3]") {
        auto pts = loss_cdf({1, 3});
        CHECK(pts[0] == std::pair{0.5, 0.25});
        CHECK(pts[1] == std::pair{1.0, 1.0});
    }
    SECTION("last point is exactly (1,1); coordinates non-decreasing") {
        Rng rng(81);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> losses;
            std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 200));
            for (std::size_t i = 0; i < n; ++i) losses.push_back(rng.uniform(0, 5));
            losses[0] += 1e-9;  // guarantee non-zero total
            auto pts = loss_cdf(losses);
            CHECK(pts.back() == std::pair{1.0, 1.0});
            for (std::size_t i = 1; i < pts.size(); ++i) {
                CHECK(pts[i].first >= pts[i - 1].first);
                CHECK(pts[i].second >= pts[i - 1].second - 1e-15);
            }
            CHECK(pts[0].second >= 0.0);
        }
    }
    SECTION("errors") {
        CHECK_THROWS_AS(loss_cdf({}), std::invalid_argument);
        CHECK_THROWS_AS(loss_cdf({0, 0, 0}), std::invalid_argument);
    }
}

TEST_CASE("cdf gamma sweep") {
    std::vector<LogitSample> pop = synthetic_population();
    std::vector<double> gammas = {0, 0.5, 1, 2};
    std::vector<CdfCurve> curves = cdf_gamma_sweep(pop, gammas);
    REQUIRE(curves.size() == 8);

    SECTION("gamma = 0 background curve equals the plain-CE CDF") {
        std::vector<double> ce;
        for (const LogitSample& s : pop)
            if (!s.is_foreground) ce.push_back(binary_ce(s.logit, false));
        auto want = loss_cdf(ce);
        const CdfCurve& got = find_curve(curves, "background", 0.0);
        REQUIRE(got.points.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got.points[i].first == Catch::Approx(want[i].first).margin(1e-12));
            CHECK(got.points[i].second == Catch::Approx(want[i].second).margin(1e-9));
        }
    }
    SECTION("background bottom-90% share strictly decreases with gamma") {
        double prev = 2.0;
        for (double g : gammas) {
            double share = find_curve(curves, "background", g).share_at(0.9);
            CHECK(share < prev);
            prev = share;
        }
    }
    SECTION("gamma reweighting moves background mass far more than foreground") {
        double bg_delta = find_curve(curves, "background", 0.0).share_at(0.9) -
                          find_curve(curves, "background", 2.0).share_at(0.9);
        double fg_delta = std::abs(find_curve(curves, "foreground", 0.0).share_at(0.9) -
                                   find_curve(curves, "foreground", 2.0).share_at(0.9));
        CHECK(bg_delta > 0);
        CHECK(bg_delta > fg_delta);
    }
    SECTION("per-sample loss ordering is gamma-invariant within a population") {
        // focal loss is monotone in p_t for any gamma, so ranks must agree
        std::vector<double> l0, l2;
        for (const LogitSample& s : pop)
            if (!s.is_foreground) {
                l0.push_back(focal_loss(s.logit, false, 0.0, 0.25));
                l2.push_back(focal_loss(s.logit, false, 2.0, 0.25));
            }
        std::vector<std::size_t> r0(l0.size()), r2(l2.size());
        std::iota(r0.begin(), r0.end(), 0);
        std::iota(r2.begin(), r2.end(), 0);
        std::stable_sort(r0.begin(), r0.end(), [&](auto a, auto b) { return l0[a] < l0[b]; });
        std::stable_sort(r2.begin(), r2.end(), [&](auto a, auto b) { return l2[a] < l2[b]; });
        CHECK(r0 == r2);
    }
    SECTION("single-population input is an error") {
        std::vector<LogitSample> only_bg = {{-1.0, false}, {0.5, false}};
        CHECK_THROWS_AS(cdf_gamma_sweep(only_bg, gammas), std::invalid_argument);
    }
}
