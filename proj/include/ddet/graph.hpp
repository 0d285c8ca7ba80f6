#ifndef DDET_GRAPH_HPP
#define DDET_GRAPH_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ddet/tensor.hpp"

namespace ddet {

// Dynamic tape. Each op records its inputs and caches its activation; backward
// walks the tape in reverse. Parallel loops only ever split over independent
// output slices with a fixed inner summation order, so results are
// bit-identical for any thread count.
template <typename T>
class Graph {
public:
    enum class Op { Leaf, Conv2d, Relu, Sigmoid, Add, Upsample2x, Sum, CustomScalar };

    // A custom scalar node computes its value and the gradients w.r.t. each
    // input in one pass (losses use this; their analytic gradients are
    // validated against finite differences in the test suite).
    using CustomFn = std::function<T(const std::vector<const Tensor<T>*>& inputs,
                                     std::vector<Tensor<T>>& input_grads)>;

    struct Node {
        Op op = Op::Leaf;
        std::vector<int> in;
        Tensor<T> val;
        Tensor<T> grad;
        int stride = 1;
        int pad = 0;
        bool trainable = false;
        std::string name;
        CustomFn custom;
        std::vector<Tensor<T>> custom_grads;
    };

    int leaf(Tensor<T> value, std::string name = {}, bool trainable = false) {
        Node n;
        n.op = Op::Leaf;
        n.val = std::move(value);
        n.name = std::move(name);
        n.trainable = trainable;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int conv2d(int x, int w, int b, int stride, int pad) {
        const Tensor<T>& in = nodes_[x].val;
        const Tensor<T>& wt = nodes_[w].val;
        const Tensor<T>& bs = nodes_[b].val;
        if (in.rank() != 4 || wt.rank() != 4)
            throw std::invalid_argument("conv2d: input and weight must be rank 4");
        if (wt.dim(2) != wt.dim(3) || (wt.dim(2) != 1 && wt.dim(2) != 3))
            throw std::invalid_argument("conv2d: kernel must be 1x1 or 3x3");
        if (in.dim(1) != wt.dim(1))
            throw std::invalid_argument("conv2d: channel mismatch " + shape_str(in.shape) +
                                        " vs " + shape_str(wt.shape));
        if (bs.numel() != wt.dim(0))
            throw std::invalid_argument("conv2d: bias length mismatch");
        Node n;
        n.op = Op::Conv2d;
        n.in = {x, w, b};
        n.stride = stride;
        n.pad = pad;
        n.val = conv2d_forward(in, wt, bs, stride, pad);
        return push(std::move(n));
    }

    int relu(int x) {
        Node n;
        n.op = Op::Relu;
        n.in = {x};
        n.val = nodes_[x].val;
        for (T& v : n.val.data) v = v > T(0) ? v : T(0);
        return push(std::move(n));
    }

    int sigmoid(int x) {
        Node n;
        n.op = Op::Sigmoid;
        n.in = {x};
        n.val = nodes_[x].val;
        for (T& v : n.val.data) v = stable_sigmoid(v);
        return push(std::move(n));
    }

    int add(int a, int b) {
        const Tensor<T>& ta = nodes_[a].val;
        const Tensor<T>& tb = nodes_[b].val;
        if (!ta.same_shape(tb))
            throw std::invalid_argument("add: shape mismatch " + shape_str(ta.shape) + " vs " +
                                        shape_str(tb.shape));
        Node n;
        n.op = Op::Add;
        n.in = {a, b};
        n.val = ta;
        for (std::size_t i = 0; i < tb.numel(); ++i) n.val.data[i] += tb.data[i];
        return push(std::move(n));
    }

    int upsample2x(int x) {
        const Tensor<T>& in = nodes_[x].val;
        if (in.rank() != 4) throw std::invalid_argument("upsample2x: rank 4 required");
        std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
        Node n;
        n.op = Op::Upsample2x;
        n.in = {x};
        n.val = Tensor<T>({N, C, 2 * H, 2 * W});
        for (std::size_t nn = 0; nn < N; ++nn)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t h = 0; h < 2 * H; ++h)
                    for (std::size_t w = 0; w < 2 * W; ++w)
                        n.val.at4(nn, c, h, w) = in.at4(nn, c, h / 2, w / 2);
        return push(std::move(n));
    }

    int sum(int x) {
        Node n;
        n.op = Op::Sum;
        n.in = {x};
        T s = T(0);
        for (T v : nodes_[x].val.data) s += v;
        n.val = Tensor<T>({1}, std::vector<T>{s});
        return push(std::move(n));
    }

    int custom_scalar(std::vector<int> inputs, CustomFn fn) {
        Node n;
        n.op = Op::CustomScalar;
        n.in = std::move(inputs);
        n.custom = std::move(fn);
        std::vector<const Tensor<T>*> ins;
        for (int i : n.in) ins.push_back(&nodes_[i].val);
        n.custom_grads.clear();
        T v = n.custom(ins, n.custom_grads);
        if (n.custom_grads.size() != n.in.size())
            throw std::logic_error("custom_scalar: gradient count mismatch");
        n.val = Tensor<T>({1}, std::vector<T>{v});
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error("non-finite values after custom_scalar");
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor<T>& value(int id) const { return nodes_[id].val; }
    const Tensor<T>& gradient(int id) const { return nodes_[id].grad; }
    Node& node(int id) { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse-mode sweep from a scalar loss node. A trainable leaf that the
    // loss does not depend on keeps an all-zero gradient (not an error).
    void backward(int loss_id) {
        if (nodes_[loss_id].val.numel() != 1)
            throw std::invalid_argument("backward: loss node must be scalar");
        for (Node& n : nodes_) n.grad = Tensor<T>(n.val.shape, T(0));
        nodes_[loss_id].grad.data[0] = T(1);
        for (int id = loss_id; id >= 0; --id) backward_one(id);
    }

    static T stable_sigmoid(T x) {
        if (x >= T(0)) {
            T e = std::exp(-x);
            return T(1) / (T(1) + e);
        }
        T e = std::exp(x);
        return e / (T(1) + e);
    }

    // Reference semantics used by both the graph and the naive test oracle.
    static Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& wt,
                                    const Tensor<T>& bias, int stride, int pad) {
        const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
        const std::size_t O = wt.dim(0), K = wt.dim(2);
        const std::size_t Ho = (H + 2 * pad - K) / stride + 1;
        const std::size_t Wo = (W + 2 * pad - K) / stride + 1;
        Tensor<T> out({N, O, Ho, Wo});
        const std::int64_t p = pad, s = stride, k = static_cast<std::int64_t>(K);
        const std::int64_t iH = static_cast<std::int64_t>(H), iW = static_cast<std::int64_t>(W);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (std::int64_t n = 0; n < static_cast<std::int64_t>(N); ++n)
            for (std::int64_t o = 0; o < static_cast<std::int64_t>(O); ++o)
                for (std::int64_t y = 0; y < static_cast<std::int64_t>(Ho); ++y)
                    for (std::int64_t x = 0; x < static_cast<std::int64_t>(Wo); ++x) {
                        // summation order fixed: channel, kernel row, kernel col
                        T acc = bias.data[o];
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::int64_t kh = 0; kh < k; ++kh) {
                                std::int64_t iy = y * s - p + kh;
                                if (iy < 0 || iy >= iH) continue;
                                for (std::int64_t kw = 0; kw < k; ++kw) {
                                    std::int64_t ix = x * s - p + kw;
                                    if (ix < 0 || ix >= iW) continue;
                                    acc += wt.at4(o, c, kh, kw) * in.at4(n, c, iy, ix);
                                }
                            }
                        out.at4(n, o, y, x) = acc;
                    }
        out.check_finite("conv2d");
        return out;
    }

private:
    int push(Node n) {
        n.val.check_finite(op_name(n.op));
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    static const char* op_name(Op op) {
        switch (op) {
            case Op::Conv2d: return "conv2d";
            case Op::Relu: return "relu";
            case Op::Sigmoid: return "sigmoid";
            case Op::Add: return "add";
            case Op::Upsample2x: return "upsample2x";
            case Op::Sum: return "sum";
            default: return "node";
        }
    }

    void backward_one(int id) {
        Node& n = nodes_[id];
        bool any = false;
        for (T g : n.grad.data)
            if (g != T(0)) { any = true; break; }
        if (!any) return;
        switch (n.op) {
            case Op::Leaf: break;
            case Op::Conv2d: backward_conv2d(n); break;
            case Op::Relu: {
                Node& x = nodes_[n.in[0]];
                const Tensor<T>& xin = x.val;
                for (std::size_t i = 0; i < xin.numel(); ++i)
                    if (xin.data[i] > T(0)) x.grad.data[i] += n.grad.data[i];
                break;
            }
            case Op::Sigmoid: {
                Node& x = nodes_[n.in[0]];
                for (std::size_t i = 0; i < n.val.numel(); ++i) {
                    T y = n.val.data[i];
                    x.grad.data[i] += n.grad.data[i] * y * (T(1) - y);
                }
                break;
            }
            case Op::Add: {
                Node& a = nodes_[n.in[0]];
                Node& b = nodes_[n.in[1]];
                for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                    a.grad.data[i] += n.grad.data[i];
                    b.grad.data[i] += n.grad.data[i];
                }
                break;
            }
            case Op::Upsample2x: {
                Node& x = nodes_[n.in[0]];
                std::size_t N = x.val.dim(0), C = x.val.dim(1), H = x.val.dim(2),
                            W = x.val.dim(3);
                for (std::size_t nn = 0; nn < N; ++nn)
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t h = 0; h < H; ++h)
                            for (std::size_t w = 0; w < W; ++w) {
                                T g = n.grad.at4(nn, c, 2 * h, 2 * w) +
                                      n.grad.at4(nn, c, 2 * h, 2 * w + 1) +
                                      n.grad.at4(nn, c, 2 * h + 1, 2 * w) +
                                      n.grad.at4(nn, c, 2 * h + 1, 2 * w + 1);
                                x.grad.at4(nn, c, h, w) += g;
                            }
                break;
            }
            case Op::Sum: {
                Node& x = nodes_[n.in[0]];
                T g = n.grad.data[0];
                for (T& v : x.grad.data) v += g;
                break;
            }
            case Op::CustomScalar: {
                T g = n.grad.data[0];
                for (std::size_t i = 0; i < n.in.size(); ++i) {
                    Node& x = nodes_[n.in[i]];
                    const Tensor<T>& gi = n.custom_grads[i];
                    for (std::size_t j = 0; j < gi.numel(); ++j)
                        x.grad.data[j] += g * gi.data[j];
                }
                break;
            }
        }
    }

    void backward_conv2d(Node& n) {
        Node& xn = nodes_[n.in[0]];
        Node& wn = nodes_[n.in[1]];
        Node& bn = nodes_[n.in[2]];
        const Tensor<T>& in = xn.val;
        const Tensor<T>& wt = wn.val;
        const Tensor<T>& go = n.grad;
        const std::size_t N = in.dim(0), C = in.dim(1);
        const std::size_t O = wt.dim(0), K = wt.dim(2);
        const std::size_t Ho = go.dim(2), Wo = go.dim(3);
        const std::int64_t p = n.pad, s = n.stride, k = static_cast<std::int64_t>(K);
        const std::int64_t iH = static_cast<std::int64_t>(in.dim(2));
        const std::int64_t iW = static_cast<std::int64_t>(in.dim(3));

        // dInput: each thread owns a batch slice, scatter within it.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::int64_t nn = 0; nn < static_cast<std::int64_t>(N); ++nn)
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t y = 0; y < Ho; ++y)
                    for (std::size_t x = 0; x < Wo; ++x) {
                        T g = go.at4(nn, o, y, x);
                        if (g == T(0)) continue;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::int64_t kh = 0; kh < k; ++kh) {
                                std::int64_t iy = static_cast<std::int64_t>(y) * s - p + kh;
                                if (iy < 0 || iy >= iH) continue;
                                for (std::int64_t kw = 0; kw < k; ++kw) {
                                    std::int64_t ix = static_cast<std::int64_t>(x) * s - p + kw;
                                    if (ix < 0 || ix >= iW) continue;
                                    xn.grad.at4(nn, c, iy, ix) += g * wt.at4(o, c, kh, kw);
                                }
                            }
                    }

        // dWeight: each thread owns output channels, fixed n/y/x order inside.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::int64_t o = 0; o < static_cast<std::int64_t>(O); ++o)
            for (std::size_t c = 0; c < C; ++c)
                for (std::int64_t kh = 0; kh < k; ++kh)
                    for (std::int64_t kw = 0; kw < k; ++kw) {
                        T acc = T(0);
                        for (std::size_t nn = 0; nn < N; ++nn)
                            for (std::size_t y = 0; y < Ho; ++y) {
                                std::int64_t iy = static_cast<std::int64_t>(y) * s - p + kh;
                                if (iy < 0 || iy >= iH) continue;
                                for (std::size_t x = 0; x < Wo; ++x) {
                                    std::int64_t ix = static_cast<std::int64_t>(x) * s - p + kw;
                                    if (ix < 0 || ix >= iW) continue;
                                    acc += go.at4(nn, o, y, x) * in.at4(nn, c, iy, ix);
                                }
                            }
                        wn.grad.at4(o, c, kh, kw) += acc;
                    }

        for (std::size_t o = 0; o < O; ++o) {
            T acc = T(0);
            for (std::size_t nn = 0; nn < N; ++nn)
                for (std::size_t y = 0; y < Ho; ++y)
                    for (std::size_t x = 0; x < Wo; ++x) acc += go.at4(nn, o, y, x);
            bn.grad.data[o] += acc;
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace ddet

#endif
