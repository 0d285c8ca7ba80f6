#ifndef DDET_FPS_HPP
#define DDET_FPS_HPP

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace ddet {

struct FpsStats {
    double mean_fps = 0;
    double std_fps = 0;  // population std over per-run FPS
    std::vector<double> per_run_seconds;
    int warmup_runs = 0;
    int measured_runs = 0;
};

using Clock = std::function<double()>;  // monotonic seconds

inline Clock steady_clock_seconds() {
    return [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };
}

// Times `work` (one single-image inference per call) sequentially: `warmup`
// untimed calls, then `runs` timed ones. mean_fps = runs / total seconds.
inline FpsStats fps_benchmark(const std::function<void()>& work, int warmup, int runs,
                              const Clock& clock) {
    if (runs < 2) throw std::invalid_argument("fps_benchmark: runs must be >= 2");
    for (int i = 0; i < warmup; ++i) work();
    FpsStats st;
    st.warmup_runs = warmup;
    st.measured_runs = runs;
    double total = 0;
    for (int i = 0; i < runs; ++i) {
        double t0 = clock();
        work();
        double dt = clock() - t0;
        if (dt <= 0) throw std::runtime_error("fps_benchmark: zero-duration clock reading");
        st.per_run_seconds.push_back(dt);
        total += dt;
    }
    st.mean_fps = static_cast<double>(runs) / total;
    double mean_run_fps = 0;
    for (double s : st.per_run_seconds) mean_run_fps += 1.0 / s;
    mean_run_fps /= runs;
    double var = 0;
    for (double s : st.per_run_seconds) {
        double d = 1.0 / s - mean_run_fps;
        var += d * d;
    }
    st.std_fps = std::sqrt(var / runs);
    return st;
}

inline void write_fps_csv(std::ostream& os, const FpsStats& st) {
    char buf[128];
    os << "metric,value\n";
    std::snprintf(buf, sizeof(buf), "mean_fps,%.6f\n", st.mean_fps);
    os << buf;
    std::snprintf(buf, sizeof(buf), "std_fps,%.6f\n", st.std_fps);
    os << buf;
    os << "warmup_runs," << st.warmup_runs << "\n";
    os << "measured_runs," << st.measured_runs << "\n";
    for (std::size_t i = 0; i < st.per_run_seconds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "run_%zu_seconds,%.6f\n", i, st.per_run_seconds[i]);
        os << buf;
    }
}

}  // namespace ddet

#endif
