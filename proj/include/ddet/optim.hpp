#ifndef DDET_OPTIM_HPP
#define DDET_OPTIM_HPP

#include <map>
#include <stdexcept>
#include <string>

#include "ddet/tensor.hpp"

namespace ddet {

// Training hyper-parameters. Defaults are the experimental settings:
// lr 0.01, weight decay 0.0001, momentum 0.9, gamma 2, alpha 0.25.
struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    double gamma = 2.0;
    double alpha = 0.25;
    int steps = 2000;
    int batch_size = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be > 0");
        if (momentum < 0 || momentum >= 1) throw std::invalid_argument("momentum must be in [0,1)");
        if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
        if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
        if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must be in (0,1)");
        if (steps <= 0) throw std::invalid_argument("steps must be > 0");
        if (batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
    }
};

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

// SGD with momentum, weight decay coupled into the gradient:
//   v <- momentum*v + g + weight_decay*w;  w <- w - lr*v
// Velocity entries are created lazily (zero-initialized).
template <typename T>
void sgd_step(ParamMap<T>& params, const ParamMap<T>& grads, ParamMap<T>& velocity,
              const TrainConfig& cfg, double lr_override = -1.0) {
    const T lr = static_cast<T>(lr_override >= 0 ? lr_override : cfg.learning_rate);
    const T mu = static_cast<T>(cfg.momentum);
    const T wd = static_cast<T>(cfg.weight_decay);
    for (auto& [name, w] : params) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw std::invalid_argument("sgd_step: missing gradient for '" + name + "'");
        const Tensor<T>& g = git->second;
        if (!g.same_shape(w))
            throw std::invalid_argument("sgd_step: shape mismatch for '" + name + "'");
        auto [vit, inserted] = velocity.try_emplace(name, Tensor<T>(w.shape, T(0)));
        Tensor<T>& v = vit->second;
        if (!inserted && !v.same_shape(w))
            throw std::invalid_argument("sgd_step: velocity shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < w.numel(); ++i) {
            v.data[i] = mu * v.data[i] + g.data[i] + wd * w.data[i];
            w.data[i] -= lr * v.data[i];
        }
    }
}

}  // namespace ddet

#endif
