#pragma once

#include <array>
#include <cmath>
#include <span>

#include "absnet/config.hpp"
#include "absnet/corpus.hpp"
#include "absnet/nn.hpp"

namespace absnet {

using nn::Vec;

using ClassProbabilities = std::array<double, kNumClasses>;

// z -> fc0 -> leaky ReLU -> fc1 -> leaky ReLU -> fc2 -> logits.
class Classifier {
public:
    explicit Classifier(const ClassifierConfig& cfg);

    template <class T>
    struct Trace {
        Vec<T> pre0, act0, pre1, act1, logits;
    };

    template <class T>
    void declare(ParameterStore<T>& s) const {
        fc0_.declare(s);
        fc1_.declare(s);
        fc2_.declare(s);
    }

    template <class T>
    Vec<T> logits(const ParameterStore<T>& p, std::span<const T> z, Trace<T>* tr = nullptr) const {
        check_width(z.size());
        Trace<T> local;
        Trace<T>& t = tr ? *tr : local;
        t.pre0 = fc0_.forward<T>(p, z);
        t.act0 = activate(t.pre0);
        t.pre1 = fc1_.forward<T>(p, t.act0);
        t.act1 = activate(t.pre1);
        t.logits = fc2_.forward<T>(p, t.act1);
        return t.logits;
    }

    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> z, const Trace<T>& t,
                  std::span<const T> dlogits, std::span<T> dz) const {
        Vec<T> d1(t.act1.size(), T(0));
        fc2_.backward<T>(p, g, t.act1, dlogits, d1);
        for (std::size_t i = 0; i < d1.size(); ++i) d1[i] *= nn::leaky_relu_grad(t.pre1[i]);
        Vec<T> d0(t.act0.size(), T(0));
        fc1_.backward<T>(p, g, t.act0, d1, d0);
        for (std::size_t i = 0; i < d0.size(); ++i) d0[i] *= nn::leaky_relu_grad(t.pre0[i]);
        fc0_.backward<T>(p, g, z, d0, dz);
    }

private:
    int embedding_dim_;
    nn::Linear fc0_, fc1_, fc2_;

    template <class T>
    static Vec<T> activate(const Vec<T>& pre) {
        Vec<T> out(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) out[i] = nn::leaky_relu(pre[i]);
        return out;
    }

    void check_width(std::size_t n) const;
};

template <class T>
Vec<T> softmax(std::span<const T> logits) {
    T m = logits[0];
    for (T v : logits) m = std::max(m, v);
    Vec<T> p(logits.size());
    T s = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) s += (p[i] = std::exp(logits[i] - m));
    for (auto& v : p) v /= s;
    return p;
}

// -log softmax(logits)[label] via log-sum-exp. Adds softmax - onehot into
// dlogits when non-empty.
template <class T>
T cross_entropy(std::span<const T> logits, int label, std::span<T> dlogits = {}) {
    T m = logits[0];
    for (T v : logits) m = std::max(m, v);
    T s = 0;
    for (T v : logits) s += std::exp(v - m);
    const T lse = m + std::log(s);
    if (!dlogits.empty())
        for (std::size_t i = 0; i < logits.size(); ++i)
            dlogits[i] += std::exp(logits[i] - lse) - (static_cast<int>(i) == label ? T(1) : T(0));
    return lse - logits[std::size_t(label)];
}

// Argmax; ties go to the lowest class index.
template <class T>
AbsLabel argmax_label(std::span<const T> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<AbsLabel>(best);
}

// -log(prob of label). Probabilities of exactly zero give +inf.
double classification_loss(const ClassProbabilities& probs, AbsLabel label);

}  // namespace absnet
