#ifndef DDET_IMAGE_OPS_HPP
#define DDET_IMAGE_OPS_HPP

#include <stdexcept>
#include <vector>

#include "ddet/box.hpp"
#include "ddet/rng.hpp"
#include "ddet/sdd.hpp"
#include "ddet/tensor.hpp"

namespace ddet {

// One training/eval example: normalized [3,H,W] image plus its ground truth.
struct Sample {
    Tensorf image;
    GroundTruthFrame gt;
    std::string source_id;

    std::size_t height() const { return image.dim(1); }
    std::size_t width() const { return image.dim(2); }
};

// (x - mean) / std per channel; defaults map [0,255] to [-1,1].
template <typename T>
Tensor<T> normalize_image(const Tensor<T>& img, const std::vector<double>& mean = {127.5, 127.5, 127.5},
                          const std::vector<double>& stddev = {127.5, 127.5, 127.5}) {
    if (img.rank() != 3) throw std::invalid_argument("normalize_image: image must be [C,H,W]");
    std::size_t C = img.dim(0), plane = img.dim(1) * img.dim(2);
    if (mean.size() != C || stddev.size() != C)
        throw std::invalid_argument("normalize_image: mean/std channel count mismatch");
    for (double s : stddev)
        if (s <= 0) throw std::invalid_argument("normalize_image: std must be > 0");
    Tensor<T> out = img;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            T& v = out.data[c * plane + i];
            v = static_cast<T>((static_cast<double>(v) - mean[c]) / stddev[c]);
        }
    return out;
}

template <typename T>
Tensor<T> denormalize_image(const Tensor<T>& img, const std::vector<double>& mean = {127.5, 127.5, 127.5},
                            const std::vector<double>& stddev = {127.5, 127.5, 127.5}) {
    Tensor<T> out = img;
    std::size_t C = img.dim(0), plane = img.dim(1) * img.dim(2);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            T& v = out.data[c * plane + i];
            v = static_cast<T>(static_cast<double>(v) * stddev[c] + mean[c]);
        }
    return out;
}

template <typename T>
Tensor<T> hflip_image(const Tensor<T>& img) {
    if (img.rank() != 3) throw std::invalid_argument("hflip_image: image must be [C,H,W]");
    std::size_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor<T> out(img.shape);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                out.data[(c * H + y) * W + x] = img.data[(c * H + y) * W + (W - 1 - x)];
    return out;
}

inline Box hflip_box(const Box& b, double image_w) {
    return {image_w - b.x2, b.y1, image_w - b.x1, b.y2};
}

// With probability p: reverse image columns and mirror every box. Class and
// track ids are unchanged.
inline Sample augment_hflip(const Sample& s, double p, Rng& rng) {
    if (p < 0 || p > 1) throw std::invalid_argument("augment_hflip: p must be in [0,1]");
    if (!rng.bernoulli(p)) return s;
    Sample out = s;
    out.image = hflip_image(s.image);
    double w = static_cast<double>(s.width());
    for (AnnotatedObject& o : out.gt.objects) o.box = hflip_box(o.box, w);
    return out;
}

// Center crop to the largest size divisible by `multiple`; boxes are shifted
// and clipped, and objects left without extent are dropped.
inline Sample center_crop_to_multiple(const Sample& s, std::size_t multiple) {
    std::size_t H = s.height(), W = s.width();
    std::size_t nh = (H / multiple) * multiple, nw = (W / multiple) * multiple;
    if (nh == 0 || nw == 0)
        throw std::invalid_argument("center_crop_to_multiple: image smaller than multiple");
    if (nh == H && nw == W) return s;
    std::size_t oy = (H - nh) / 2, ox = (W - nw) / 2;
    Sample out;
    out.source_id = s.source_id;
    out.gt.frame_index = s.gt.frame_index;
    out.image = Tensorf({3, nh, nw});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < nh; ++y)
            for (std::size_t x = 0; x < nw; ++x)
                out.image.data[(c * nh + y) * nw + x] =
                    s.image.data[(c * H + (y + oy)) * W + (x + ox)];
    for (AnnotatedObject o : s.gt.objects) {
        o.box = Box{o.box.x1 - static_cast<double>(ox), o.box.y1 - static_cast<double>(oy),
                    o.box.x2 - static_cast<double>(ox), o.box.y2 - static_cast<double>(oy)}
                    .clipped(static_cast<double>(nw), static_cast<double>(nh));
        if (o.box.w() > 0 && o.box.h() > 0) out.gt.objects.push_back(o);
    }
    return out;
}

}  // namespace ddet

#endif
