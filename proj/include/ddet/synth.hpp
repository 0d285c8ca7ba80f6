#ifndef DDET_SYNTH_HPP
#define DDET_SYNTH_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/image_ops.hpp"
#include "ddet/ppm.hpp"
#include "ddet/rng.hpp"
#include "ddet/sdd.hpp"

namespace ddet {

// Desk-scale stand-in corpus: noisy backgrounds with disks, squares and
// triangles; the tight bounding box of each rendered shape is the GT.
struct SynthConfig {
    std::size_t image_size = 64;
    std::size_t train_images = 500;
    std::size_t test_images = 50;
    int min_objects = 1;
    int max_objects = 4;
    double noise = 0.25;       // background amplitude as a fraction of 255
    double max_overlap = 0.3;  // IoU cap between placed shapes
    std::uint64_t seed = 0;

    void validate() const {
        if (image_size % 16 != 0)
            throw std::invalid_argument("synth: image_size must be divisible by 16");
        if (min_objects < 1 || max_objects < min_objects)
            throw std::invalid_argument("synth: need 1 <= min_objects <= max_objects");
        if (noise < 0 || noise > 1) throw std::invalid_argument("synth: noise must be in [0,1]");
    }
};

inline std::vector<std::string> synth_class_names() { return {"Disk", "Square", "Triangle"}; }

inline LabelMap synth_label_map() {
    return {{"Disk", 0}, {"Square", 1}, {"Triangle", 2}};
}

namespace synth_detail {

struct Placed {
    Box box;
    int class_id;
};

// Renders one shape into the 0-255 image and returns its tight pixel bbox.
inline Box draw_shape(Tensorf& img, int cls, double cx, double cy, double size,
                      const double rgb[3]) {
    std::size_t H = img.dim(1), W = img.dim(2);
    long min_x = static_cast<long>(W), min_y = static_cast<long>(H), max_x = -1, max_y = -1;
    auto put = [&](long x, long y) {
        if (x < 0 || y < 0 || x >= static_cast<long>(W) || y >= static_cast<long>(H)) return;
        for (std::size_t c = 0; c < 3; ++c)
            img.data[(c * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)] =
                static_cast<float>(rgb[c]);
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
    };
    double half = size / 2.0;
    long y0 = static_cast<long>(std::floor(cy - half)), y1 = static_cast<long>(std::ceil(cy + half));
    long x0 = static_cast<long>(std::floor(cx - half)), x1 = static_cast<long>(std::ceil(cx + half));
    for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) {
            double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            bool inside = false;
            switch (cls) {
                case 0:  // disk
                    inside = (px - cx) * (px - cx) + (py - cy) * (py - cy) <= half * half;
                    break;
                case 1:  // square
                    inside = std::abs(px - cx) <= half && std::abs(py - cy) <= half;
                    break;
                case 2: {  // up-pointing isoceles triangle
                    double t = (py - (cy - half)) / size;  // 0 at apex, 1 at base
                    inside = t >= 0 && t <= 1 && std::abs(px - cx) <= t * half;
                    break;
                }
            }
            if (inside) put(x, y);
        }
    if (max_x < 0) throw std::logic_error("synth: shape rendered no pixels");
    return {static_cast<double>(min_x), static_cast<double>(min_y),
            static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
}

}  // namespace synth_detail

// One image plus its annotation frame. Images carry raw 0-255 values; the
// loader normalizes.
inline std::pair<Tensorf, GroundTruthFrame> synth_image(const SynthConfig& cfg,
                                                        std::size_t frame_index, Rng& rng) {
    std::size_t S = cfg.image_size;
    Tensorf img({3, S, S});
    for (float& v : img.data) v = static_cast<float>(rng.uniform(0.0, 255.0 * cfg.noise));

    static const double base_colors[3][3] = {
        {220, 70, 70}, {70, 220, 70}, {80, 100, 230}};
    GroundTruthFrame gt;
    gt.frame_index = frame_index;
    int count = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));
    std::vector<synth_detail::Placed> placed;
    for (int i = 0; i < count; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            int cls = static_cast<int>(rng.uniform_int(0, 2));
            double size = rng.uniform(12.0, std::min(26.0, static_cast<double>(S) - 4.0));
            double half = size / 2.0;
            double cx = rng.uniform(half + 1.0, static_cast<double>(S) - half - 1.0);
            double cy = rng.uniform(half + 1.0, static_cast<double>(S) - half - 1.0);
            Box candidate{cx - half, cy - half, cx + half, cy + half};
            bool clash = false;
            for (const synth_detail::Placed& p : placed)
                if (iou(candidate, p.box) > cfg.max_overlap) { clash = true; break; }
            if (clash) continue;
            double rgb[3];
            for (int c = 0; c < 3; ++c)
                rgb[c] = std::clamp(base_colors[cls][c] + rng.uniform(-25.0, 25.0), 0.0, 255.0);
            Box tight = synth_detail::draw_shape(img, cls, cx, cy, size, rgb);
            placed.push_back({candidate, cls});
            AnnotatedObject o;
            o.box = tight;
            o.class_id = cls;
            o.track_id = i;
            gt.objects.push_back(o);
            ok = true;
        }
        if (!ok)
            throw std::runtime_error("synth: could not place object " + std::to_string(i) +
                                     " without excessive overlap after 100 attempts");
    }
    return {std::move(img), std::move(gt)};
}

// Writes frames/<split>/<idx>.ppm, annotations/<split>/annotations.txt and
// classes.txt under `root`. Byte-identical for a fixed seed.
inline void write_synth_dataset(const SynthConfig& cfg, const std::string& root) {
    cfg.validate();
    namespace fs = std::filesystem;
    const std::vector<std::string> names = synth_class_names();
    fs::create_directories(root);
    {
        std::ofstream cs(root + "/classes.txt");
        for (const std::string& n : names) cs << n << "\n";
    }
    struct Split {
        const char* name;
        std::size_t count;
        std::uint64_t salt;
    };
    for (const Split& sp : {Split{"train", cfg.train_images, 0x7261696eULL},
                            Split{"test", cfg.test_images, 0x74657374ULL}}) {
        Rng rng(cfg.seed * 0x100000001b3ULL + sp.salt);
        fs::create_directories(root + "/frames/" + sp.name);
        fs::create_directories(root + "/annotations/" + std::string(sp.name));
        std::map<std::size_t, GroundTruthFrame> frames;
        for (std::size_t i = 0; i < sp.count; ++i) {
            auto [img, gt] = synth_image(cfg, i, rng);
            save_ppm_file(root + "/frames/" + sp.name + "/" + std::to_string(i) + ".ppm", img);
            frames.emplace(i, std::move(gt));
        }
        std::ofstream as(root + "/annotations/" + std::string(sp.name) + "/annotations.txt");
        serialize_sdd_annotations(as, frames, names);
    }
}

}  // namespace ddet

#endif
