#ifndef DDET_CHECKPOINT_HPP
#define DDET_CHECKPOINT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>

#include "ddet/optim.hpp"
#include "ddet/tensor.hpp"

namespace ddet {

// Checkpoint wire format, all integers little-endian:
//   "DDET" | u32 version=1 | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 dtype (0=f32, 1=f64)
//               | u8 rank | rank x u64 dims | raw little-endian values
namespace ckpt {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename U>
void put_le(std::ostream& os, U v) {
    unsigned char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    put_bytes(os, b, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    unsigned char b[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(U)))
        throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<U>(v);
}

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 0 : 1;
}

}  // namespace ckpt

template <typename T>
void save_checkpoint(std::ostream& os, const ParamMap<T>& params) {
    os.write("DDET", 4);
    ckpt::put_le<std::uint32_t>(os, 1);
    ckpt::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        ckpt::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        ckpt::put_bytes(os, name.data(), name.size());
        ckpt::put_le<std::uint8_t>(os, ckpt::dtype_code<T>());
        ckpt::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape) ckpt::put_le<std::uint64_t>(os, d);
        for (T v : t.data) {
            if constexpr (std::is_same_v<T, float>) {
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                ckpt::put_le<std::uint32_t>(os, bits);
            } else {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                ckpt::put_le<std::uint64_t>(os, bits);
            }
        }
    }
}

template <typename T>
ParamMap<T> load_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "DDET", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    std::uint32_t version = ckpt::get_le<std::uint32_t>(is);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t count = ckpt::get_le<std::uint32_t>(is);
    ParamMap<T> params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t nlen = ckpt::get_le<std::uint16_t>(is);
        std::string name(nlen, '\0');
        if (!is.read(name.data(), nlen)) throw std::runtime_error("checkpoint: truncated name");
        std::uint8_t dtype = ckpt::get_le<std::uint8_t>(is);
        if (dtype != ckpt::dtype_code<T>())
            throw std::runtime_error("checkpoint: dtype mismatch for '" + name + "'");
        std::uint8_t rank = ckpt::get_le<std::uint8_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(ckpt::get_le<std::uint64_t>(is));
        Tensor<T> t(shape);
        for (T& v : t.data) {
            if constexpr (std::is_same_v<T, float>) {
                std::uint32_t bits = ckpt::get_le<std::uint32_t>(is);
                std::memcpy(&v, &bits, 4);
            } else {
                std::uint64_t bits = ckpt::get_le<std::uint64_t>(is);
                std::memcpy(&v, &bits, 8);
            }
        }
        params.emplace(std::move(name), std::move(t));
    }
    return params;
}

template <typename T>
void save_checkpoint_file(const std::string& path, const ParamMap<T>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    save_checkpoint(os, params);
}

template <typename T>
ParamMap<T> load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_checkpoint<T>(is);
}

}  // namespace ddet

#endif
