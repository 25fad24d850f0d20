#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ivqa/params.hpp"
#include "ivqa/tensor.hpp"

namespace ivqa {

template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m;
    std::map<std::string, Tensor<T>> v;
    std::uint64_t t = 0;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update, applied in place.
template <typename T>
void adam_step(ParamRegistry<T>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
    state.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (auto& e : params.entries()) {
        auto git = grads.find(e.name);
        if (git == grads.end()) throw DataError("adam_step: missing gradient for " + e.name);
        const Tensor<T>& g = git->second;
        if (!g.same_shape(e.tensor))
            throw DataError("adam_step: gradient shape mismatch for " + e.name);
        auto mit = state.m.find(e.name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(e.name, Tensor<T>::zeros(e.tensor.shape)).first;
            state.v.emplace(e.name, Tensor<T>::zeros(e.tensor.shape));
        }
        Tensor<T>& m = mit->second;
        Tensor<T>& v = state.v.at(e.name);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double gi = static_cast<double>(g.data[i]);
            double mi = cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * gi;
            double vi = cfg.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.beta2) * gi * gi;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            e.tensor.data[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
        e.tensor.require_finite("adam_step output");
    }
    params.step_count += 1;
}

}  // namespace ivqa
