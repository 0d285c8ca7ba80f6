#ifndef DDET_RENDER_HPP
#define DDET_RENDER_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ddet/box.hpp"
#include "ddet/tensor.hpp"

namespace ddet {

using Rgb = std::array<double, 3>;

// One distinct color per class id, cycling after six.
inline Rgb class_color(int class_id) {
    static const Rgb palette[6] = {{255, 64, 64},  {64, 255, 64},  {64, 96, 255},
                                   {255, 224, 32}, {255, 64, 255}, {32, 224, 224}};
    return palette[class_id % 6];
}

// Draws box perimeters onto a copy of the 0-255 image. Pixels outside the
// image are skipped; the input is never modified.
template <typename T>
Tensor<T> render_detections(const Tensor<T>& image, const std::vector<Detection>& dets,
                            int line_width = 2) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("render_detections: image must be [3,H,W]");
    Tensor<T> out = image;
    const long H = static_cast<long>(image.dim(1)), W = static_cast<long>(image.dim(2));
    auto put = [&](long x, long y, const Rgb& c) {
        if (x < 0 || y < 0 || x >= W || y >= H) return;
        for (std::size_t ch = 0; ch < 3; ++ch)
            out.data[(ch * static_cast<std::size_t>(H) + static_cast<std::size_t>(y)) *
                         static_cast<std::size_t>(W) +
                     static_cast<std::size_t>(x)] = static_cast<T>(c[ch]);
    };
    for (const Detection& d : dets) {
        Rgb c = class_color(d.class_id);
        long x1 = static_cast<long>(std::lround(d.box.x1));
        long y1 = static_cast<long>(std::lround(d.box.y1));
        long x2 = static_cast<long>(std::lround(d.box.x2)) - 1;
        long y2 = static_cast<long>(std::lround(d.box.y2)) - 1;
        for (int t = 0; t < line_width; ++t) {
            long xa = x1 + t, xb = x2 - t, ya = y1 + t, yb = y2 - t;
            if (xa > xb || ya > yb) break;
            for (long x = xa; x <= xb; ++x) {
                put(x, ya, c);
                put(x, yb, c);
            }
            for (long y = ya; y <= yb; ++y) {
                put(xa, y, c);
                put(xb, y, c);
            }
        }
    }
    return out;
}

// Vector overlay: one rect per detection plus a text score label.
inline void write_svg_overlay(std::ostream& os, std::size_t width, std::size_t height,
                              const std::vector<Detection>& dets,
                              const std::vector<std::string>& class_names) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    char buf[320];
    for (const Detection& d : dets) {
        Rgb c = class_color(d.class_id);
        std::snprintf(buf, sizeof(buf),
                      "  <rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                      "fill=\"none\" stroke=\"rgb(%d,%d,%d)\" stroke-width=\"2\"/>\n",
                      d.box.x1, d.box.y1, d.box.w(), d.box.h(), static_cast<int>(c[0]),
                      static_cast<int>(c[1]), static_cast<int>(c[2]));
        os << buf;
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.2f\" y=\"%.2f\" font-size=\"8\" "
                      "fill=\"rgb(%d,%d,%d)\">%s %.6f</text>\n",
                      d.box.x1, d.box.y1 > 8 ? d.box.y1 - 2 : d.box.y2 + 8,
                      static_cast<int>(c[0]), static_cast<int>(c[1]), static_cast<int>(c[2]),
                      class_names.at(static_cast<std::size_t>(d.class_id)).c_str(), d.score);
        os << buf;
    }
    os << "</svg>\n";
}

}  // namespace ddet

#endif
