#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "absnet/config.hpp"
#include "absnet/params.hpp"

namespace absnet {

// Adam with optional L2 weight decay (added to the gradient) and clipping of
// the global gradient norm over the selected entries.
class Adam {
public:
    using Selector = std::function<bool(const std::string&)>;

    Adam(const ParameterStore<float>& params, const TrainConfig& cfg)
        : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

    // Returns the pre-clipping global norm of the selected gradients.
    double step(ParameterStore<float>& params, ParameterStore<float>& grads, const Selector& select) {
        ++t_;
        double sq = 0;
        for (const auto& e : grads.entries()) {
            if (!select(e.name)) continue;
            for (float x : e.values) sq += double(x) * x;
        }
        const double norm = std::sqrt(sq);
        const double clip = cfg_.clip_norm > 0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
        const double lr = cfg_.learning_rate;
        auto& pe = params.entries();
        auto& ge = grads.entries();
        auto& me = m_.entries();
        auto& ve = v_.entries();
        for (std::size_t k = 0; k < pe.size(); ++k) {
            if (!select(pe[k].name)) continue;
            auto& p = pe[k].values;
            const auto& g = ge[k].values;
            auto& m = me[k].values;
            auto& v = ve[k].values;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double gi = double(g[i]) * clip + cfg_.weight_decay * p[i];
                m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * gi);
                v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * gi * gi);
                const double mh = m[i] / c1, vh = v[i] / c2;
                p[i] = static_cast<float>(p[i] - lr * mh / (std::sqrt(vh) + cfg_.adam_eps));
            }
        }
        return norm;
    }

    long steps() const { return t_; }

private:
    TrainConfig cfg_;
    ParameterStore<float> m_, v_;
    long t_ = 0;
};

}  // namespace absnet
