#ifndef DDET_PPM_HPP
#define DDET_PPM_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ddet/tensor.hpp"

namespace ddet {

namespace ppm_detail {

// One whitespace-delimited header token, skipping '#' comment lines.
inline std::string token(std::istream& is) {
    std::string t;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!t.empty()) return t;
            continue;
        }
        t.push_back(static_cast<char>(c));
    }
    if (t.empty()) throw std::runtime_error("ppm: truncated header");
    return t;
}

}  // namespace ppm_detail

// Binary P6, maxval 255 only. Returns a [3,H,W] tensor with values in [0,255].
template <typename T = float>
Tensor<T> load_ppm(std::istream& is) {
    if (ppm_detail::token(is) != "P6") throw std::runtime_error("ppm: wrong magic (P6 required)");
    std::size_t w = std::stoul(ppm_detail::token(is));
    std::size_t h = std::stoul(ppm_detail::token(is));
    std::string maxval = ppm_detail::token(is);
    if (maxval != "255") throw std::runtime_error("ppm: unsupported maxval " + maxval);
    // header ends with exactly one whitespace byte, already consumed by token()
    std::vector<unsigned char> raw(w * h * 3);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw std::runtime_error("ppm: truncated pixel data");
    Tensor<T> t({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                t.data[(c * h + y) * w + x] = static_cast<T>(raw[(y * w + x) * 3 + c]);
    return t;
}

template <typename T = float>
Tensor<T> load_ppm_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open image: " + path);
    return load_ppm<T>(is);
}

// Values clamped to [0,255] and rounded.
template <typename T>
void save_ppm(std::ostream& os, const Tensor<T>& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("save_ppm: image must be [3,H,W]");
    std::size_t h = img.dim(1), w = img.dim(2);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(w * h * 3);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double v = static_cast<double>(img.data[(c * h + y) * w + x]);
                v = v < 0 ? 0 : (v > 255 ? 255 : v);
                raw[(y * w + x) * 3 + c] = static_cast<unsigned char>(v + 0.5);
            }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

template <typename T>
void save_ppm_file(const std::string& path, const Tensor<T>& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open image for writing: " + path);
    save_ppm(os, img);
}

}  // namespace ddet

#endif
