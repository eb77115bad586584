#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "absnet/config.hpp"
#include "absnet/errors.hpp"
#include "absnet/nn.hpp"
#include "absnet/vocab.hpp"

namespace absnet {

using nn::Vec;

// Affine seed -> (upsample, conv, leaky ReLU) stages -> conv + tanh. CHW.
class ImageDecoder {
public:
    explicit ImageDecoder(const DecoderConfig& cfg);

    template <class T>
    struct Trace {
        Vec<T> seed;
        std::vector<Vec<T>> up;   // conv input of each hidden stage
        std::vector<Vec<T>> pre;  // conv output of each hidden stage
        Vec<T> last;              // input of the final conv
        Vec<T> out;
    };

    template <class T>
    void declare(ParameterStore<T>& s) const {
        seed_.declare(s);
        for (const auto& c : convs_) c.declare(s);
    }

    int output_size() const { return sizes_.back(); }

    template <class T>
    Vec<T> forward(const ParameterStore<T>& p, std::span<const T> z, Trace<T>* tr) const {
        check_width(z.size());
        Trace<T> local;
        Trace<T>& t = tr ? *tr : local;
        t.seed = seed_.forward<T>(p, z);
        t.up.clear();
        t.pre.clear();
        Vec<T> x = t.seed;
        int channels = seed_channels_;
        const std::size_t stages = convs_.size() - 1;
        for (std::size_t s = 0; s < stages; ++s) {
            const int in_side = sizes_[s], out_side = sizes_[s + 1];
            Vec<T> up(std::size_t(channels) * out_side * out_side);
            kernels::fast::upsample_nearest<T>(channels, in_side, in_side, out_side, out_side, x, up);
            Vec<T> pre = convs_[s].forward<T>(p, up, out_side, out_side);
            x.resize(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) x[i] = nn::leaky_relu(pre[i]);
            channels = convs_[s].out;
            t.up.push_back(std::move(up));
            t.pre.push_back(std::move(pre));
        }
        const int side = sizes_.back();
        t.out = convs_.back().forward<T>(p, x, side, side);
        for (auto& v : t.out) v = std::tanh(v);
        t.last = std::move(x);
        return t.out;
    }

    // Accumulates into dz.
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> z, const Trace<T>& t,
                  std::span<const T> dout, std::span<T> dz) const {
        const int side = sizes_.back();
        Vec<T> dpre(dout.size());
        for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] = dout[i] * (T(1) - t.out[i] * t.out[i]);
        Vec<T> dx(t.last.size(), T(0));
        convs_.back().backward<T>(p, g, t.last, side, side, dpre, dx);
        for (std::size_t s = convs_.size() - 1; s-- > 0;) {
            const int in_side = sizes_[s], out_side = sizes_[s + 1];
            const auto& pre = t.pre[s];
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= nn::leaky_relu_grad(pre[i]);
            Vec<T> dup(t.up[s].size(), T(0));
            convs_[s].backward<T>(p, g, t.up[s], out_side, out_side, dx, dup);
            const int channels = s == 0 ? seed_channels_ : convs_[s - 1].out;
            Vec<T> dprev(std::size_t(channels) * in_side * in_side, T(0));
            kernels::fast::upsample_nearest_backward<T>(channels, in_side, in_side, out_side, out_side, dup, dprev);
            dx = std::move(dprev);
        }
        seed_.backward<T>(p, g, z, dx, dz);
    }

private:
    int embedding_dim_, seed_channels_;
    std::vector<int> sizes_;
    nn::Linear seed_;
    std::vector<nn::Conv3x3> convs_;

    void check_width(std::size_t n) const;
};

// Sentence LSTM (h0 = affine(z), z as constant input) with layer-normalised
// states as sentence features; per sentence, a word LSTM (h0 = affine(feature),
// feature as constant input) whose layer-normalised states map to E-width
// word vectors.
class TextDecoder {
public:
    explicit TextDecoder(const DecoderConfig& cfg);

    template <class T>
    struct SentenceTrace {
        nn::LstmTrace<T> lstm;
        std::vector<nn::LayerNormTrace<T>> ln;
        Vec<T> h0;
        Vec<T> normed;  // steps x Hw
        Vec<T> words;   // steps x E
    };

    template <class T>
    struct Trace {
        Vec<T> h0;
        nn::LstmTrace<T> lstm;
        std::vector<nn::LayerNormTrace<T>> ln;
        Vec<T> features;  // sentences x Hs
        std::vector<SentenceTrace<T>> sentences;
    };

    template <class T>
    void declare(ParameterStore<T>& s) const {
        init_.declare(s);
        sent_.declare(s);
        sent_ln_.declare(s);
        word_init_.declare(s);
        word_.declare(s);
        word_ln_.declare(s);
        out_.declare(s);
    }

    int max_sentences() const { return max_sentences_; }
    int max_words() const { return max_words_; }
    int output_dim() const { return out_.out; }

    // Unroll lengths: `word_steps[r]` words for sentence r; sentences =
    // word_steps.size(). The full grid is max_sentences x max_words.
    template <class T>
    void forward(const ParameterStore<T>& p, std::span<const T> z, const std::vector<int>& word_steps,
                 Trace<T>& t) const {
        check_width(z.size());
        const std::size_t Hs = std::size_t(sent_.hidden), Hw = std::size_t(word_.hidden), E = std::size_t(out_.out);
        const int n = static_cast<int>(word_steps.size());
        t.h0 = init_.forward<T>(p, z);
        t.lstm = sent_.forward<T>(p, z, t.h0, n);
        t.ln.clear();
        t.features.assign(std::size_t(n) * Hs, T(0));
        t.sentences.clear();
        for (int r = 0; r < n; ++r) {
            std::span<T> feat{t.features.data() + std::size_t(r) * Hs, Hs};
            t.ln.push_back(sent_ln_.forward<T>(p, t.lstm.state(r), feat));
            SentenceTrace<T> st;
            const int m = word_steps[std::size_t(r)];
            if (m > 0) {
                std::span<const T> cfeat{feat.data(), Hs};
                st.h0 = word_init_.forward<T>(p, cfeat);
                st.lstm = word_.forward<T>(p, cfeat, st.h0, m);
                st.normed.resize(std::size_t(m) * Hw);
                st.words.resize(std::size_t(m) * E);
                for (int w = 0; w < m; ++w) {
                    std::span<T> nrm{st.normed.data() + std::size_t(w) * Hw, Hw};
                    st.ln.push_back(word_ln_.forward<T>(p, st.lstm.state(w), nrm));
                    out_.forward<T>(p, std::span<const T>(nrm.data(), Hw),
                                    std::span<T>(st.words.data() + std::size_t(w) * E, E));
                }
            }
            t.sentences.push_back(std::move(st));
        }
    }

    // Full max_sentences x max_words x E grid.
    template <class T>
    Vec<T> generate(const ParameterStore<T>& p, std::span<const T> z) const {
        Trace<T> t;
        forward<T>(p, z, std::vector<int>(std::size_t(max_sentences_), max_words_), t);
        const std::size_t E = std::size_t(out_.out);
        Vec<T> grid;
        grid.reserve(std::size_t(max_sentences_) * max_words_ * E);
        for (const auto& s : t.sentences) grid.insert(grid.end(), s.words.begin(), s.words.end());
        return grid;
    }

    // dwords[r]: gradient on sentence r's word vectors (steps x E).
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, std::span<const T> z, const Trace<T>& t,
                  const std::vector<Vec<T>>& dwords, std::span<T> dz) const {
        const std::size_t Hs = std::size_t(sent_.hidden), Hw = std::size_t(word_.hidden), E = std::size_t(out_.out);
        const int n = static_cast<int>(t.sentences.size());
        Vec<T> dsent_states(std::size_t(n) * Hs, T(0));
        for (int r = 0; r < n; ++r) {
            const auto& st = t.sentences[std::size_t(r)];
            const int m = st.lstm.steps;
            if (m == 0 || st.words.empty()) continue;
            std::span<const T> feat{t.features.data() + std::size_t(r) * Hs, Hs};
            Vec<T> dfeat(Hs, T(0));
            Vec<T> dstates(std::size_t(m) * Hw, T(0));
            const auto& dw = dwords[std::size_t(r)];
            for (int w = 0; w < m; ++w) {
                Vec<T> dnorm(Hw, T(0));
                out_.backward<T>(p, g, std::span<const T>(st.normed.data() + std::size_t(w) * Hw, Hw),
                                 std::span<const T>(dw.data() + std::size_t(w) * E, E), dnorm);
                word_ln_.backward<T>(p, g, st.ln[std::size_t(w)], dnorm,
                                     std::span<T>(dstates.data() + std::size_t(w) * Hw, Hw));
            }
            Vec<T> dh0(Hw, T(0));
            word_.backward<T>(p, g, feat, st.lstm, dstates, dfeat, dh0);
            word_init_.backward<T>(p, g, feat, dh0, dfeat);
            sent_ln_.backward<T>(p, g, t.ln[std::size_t(r)], dfeat,
                                 std::span<T>(dsent_states.data() + std::size_t(r) * Hs, Hs));
        }
        Vec<T> dh0(Hs, T(0));
        sent_.backward<T>(p, g, z, t.lstm, dsent_states, dz, dh0);
        init_.backward<T>(p, g, z, dh0, dz);
    }

private:
    int embedding_dim_, max_sentences_, max_words_;
    nn::Linear init_;
    nn::Lstm sent_;
    nn::LayerNorm sent_ln_;
    nn::Linear word_init_;
    nn::Lstm word_;
    nn::LayerNorm word_ln_;
    nn::Linear out_;

    void check_width(std::size_t n) const;
};

// Word steps needed to cover every real position of `grid`: one entry per
// sentence up to the last real one, each the last real column + 1.
std::vector<int> unroll_lengths(const TokenGrid& grid);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean squared difference. Throws ShapeMismatch.
template <class T>
T image_loss(std::span<const T> original, std::span<const T> reconstructed, std::span<T> grad = {}) {
    if (original.size() != reconstructed.size() || original.empty())
        throw usage_error("ShapeMismatch", "image_loss on " + std::to_string(original.size()) + " vs " +
                                               std::to_string(reconstructed.size()) + " values");
    T s = 0;
    const T n = T(original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        const T d = reconstructed[i] - original[i];
        s += d * d;
        if (!grad.empty()) grad[i] += T(2) * d / n;
    }
    return s / n;
}

// Cosine similarity; 0 when either vector has zero norm. Adds
// scale * d cos / d a into `grad` when non-empty.
template <class T>
T cosine(std::span<const T> a, std::span<const T> b, T scale = T(0), std::span<T> grad = {}) {
    T ab = 0, aa = 0, bb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    if (aa == T(0) || bb == T(0)) return T(0);
    const T na = std::sqrt(aa), nb = std::sqrt(bb);
    const T c = ab / (na * nb);
    if (!grad.empty())
        for (std::size_t k = 0; k < a.size(); ++k) grad[k] += scale * (b[k] / (na * nb) - c * a[k] / aa);
    return c;
}

// Mean over real positions of 1 - cos(prediction, target embedding row).
// `predicted(r, c)` returns the E-width prediction for a real position;
// `grad(r, c)` (optional) returns where to accumulate its gradient. Targets
// are constants. Throws EmptyMask.
template <class T, class Pred, class Grad>
T text_loss_impl(const TokenGrid& grid, std::span<const T> table, int dim, Pred predicted, Grad grad, bool want_grad) {
    std::size_t real = 0;
    for (auto m : grid.mask) real += m != 0;
    if (real == 0) throw data_error("EmptyMask", "text_loss with no real tokens");
    const T scale = T(-1) / T(real);
    T total = 0;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            if (!grid.real(r, c)) continue;
            std::span<const T> target{table.data() + std::size_t(grid.at(r, c)) * dim, std::size_t(dim)};
            const T cs = want_grad ? cosine<T>(predicted(r, c), target, scale, grad(r, c))
                                   : cosine<T>(predicted(r, c), target);
            total += T(1) - cs;
        }
    return total / T(real);
}

// Dense form: `predicted` is rows x cols x E.
template <class T>
T text_loss(std::span<const T> predicted, const TokenGrid& grid, std::span<const T> table, int dim,
            std::span<T> grad = {}) {
    if (predicted.size() != std::size_t(grid.rows) * grid.cols * dim)
        throw usage_error("ShapeMismatch", "prediction grid does not match token grid");
    auto at = [&](int r, int c) {
        return std::span<const T>(predicted.data() + (std::size_t(r) * grid.cols + c) * dim, std::size_t(dim));
    };
    auto gat = [&](int r, int c) {
        return std::span<T>(grad.data() + (std::size_t(r) * grid.cols + c) * dim, std::size_t(dim));
    };
    return text_loss_impl<T>(grid, table, dim, at, gat, !grad.empty());
}

// Token whose row has maximal cosine with `v` (<pad> excluded); ties go to
// the lexicographically smallest token.
std::string nearest_token(std::span<const float> v, const EmbeddingTable& table, const Vocabulary& vocab);

}  // namespace absnet
