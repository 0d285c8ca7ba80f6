#ifndef DDET_LOSS_CDF_HPP
#define DDET_LOSS_CDF_HPP

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/losses.hpp"

namespace ddet {

// Cumulative share of total loss vs. fraction of samples sorted ascending by
// loss. Shows where the loss mass concentrates as gamma changes.
struct CdfCurve {
    double gamma = 0;
    std::string population;  // "foreground" or "background"
    std::vector<std::pair<double, double>> points;  // (sample_fraction, cumulative_loss_share)

    // Share of total loss carried by the easiest `fraction` of samples.
    double share_at(double fraction) const {
        double share = 0;
        for (const auto& [f, s] : points) {
            if (f > fraction) break;
            share = s;
        }
        return share;
    }
};

inline std::vector<std::pair<double, double>> loss_cdf(std::vector<double> losses) {
    if (losses.empty()) throw std::invalid_argument("loss_cdf: empty input");
    double total = 0;
    for (double l : losses) {
        if (l < 0) throw std::invalid_argument("loss_cdf: negative loss");
        total += l;
    }
    if (total <= 0) throw std::invalid_argument("loss_cdf: total loss is zero");
    std::sort(losses.begin(), losses.end());
    std::vector<std::pair<double, double>> pts;
    double cum = 0;
    const double n = static_cast<double>(losses.size());
    for (std::size_t k = 0; k < losses.size(); ++k) {
        cum += losses[k];
        pts.emplace_back((static_cast<double>(k) + 1.0) / n, cum / total);
    }
    pts.back() = {1.0, 1.0};  // exact endpoint, robust to rounding
    return pts;
}

struct LogitSample {
    double logit;
    bool is_foreground;
};

// Recompute per-sample focal losses for each gamma (alpha fixed), split the
// population by foreground/background, and emit one CDF per (population, gamma).
inline std::vector<CdfCurve> cdf_gamma_sweep(const std::vector<LogitSample>& samples,
                                             const std::vector<double>& gammas,
                                             double alpha = 0.25) {
    bool any_fg = false, any_bg = false;
    for (const LogitSample& s : samples) (s.is_foreground ? any_fg : any_bg) = true;
    if (!any_fg || !any_bg)
        throw std::invalid_argument("cdf_gamma_sweep: both populations must be non-empty");
    std::vector<CdfCurve> out;
    for (double g : gammas) {
        std::vector<double> fg, bg;
        for (const LogitSample& s : samples) {
            double l = focal_loss(s.logit, s.is_foreground, g, alpha);
            (s.is_foreground ? fg : bg).push_back(l);
        }
        for (bool foreground : {true, false}) {
            CdfCurve c;
            c.gamma = g;
            c.population = foreground ? "foreground" : "background";
            c.points = loss_cdf(foreground ? fg : bg);
            out.push_back(std::move(c));
        }
    }
    return out;
}

// CSV: population,gamma,sample_fraction,cumulative_loss_share (6 decimals).
inline void write_cdf_csv(std::ostream& os, const std::vector<CdfCurve>& curves) {
    os << "population,gamma,sample_fraction,cumulative_loss_share\n";
    char buf[128];
    for (const CdfCurve& c : curves)
        for (const auto& [f, s] : c.points) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", c.population.c_str(), c.gamma,
                          f, s);
            os << buf;
        }
}

}  // namespace ddet

#endif
