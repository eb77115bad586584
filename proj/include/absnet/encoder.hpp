#pragma once

#include <span>
#include <string>
#include <vector>

#include "absnet/config.hpp"
#include "absnet/corpus.hpp"
#include "absnet/errors.hpp"
#include "absnet/nn.hpp"
#include "absnet/vocab.hpp"

namespace absnet {

using nn::Vec;

inline constexpr const char* kEmbeddingTable = "emb.table";

// HWC [-1, 1] image -> CHW.
template <class T>
Vec<T> image_to_chw(const PreprocessedImage& img) {
    const std::size_t plane = std::size_t(img.height) * img.width;
    Vec<T> out(plane * 3);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) out[std::size_t(c) * plane + i] = static_cast<T>(img.pixels[i * 3 + std::size_t(c)]);
    return out;
}

template <class T>
Vec<T> chw_to_hwc(std::span<const T> chw, int h, int w) {
    const std::size_t plane = std::size_t(h) * w;
    Vec<T> out(plane * 3);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) out[i * 3 + std::size_t(c)] = chw[std::size_t(c) * plane + i];
    return out;
}

// ---------------------------------------------------------------------------
// Image CNN: stride-2 3x3 conv + leaky ReLU blocks, global average pooling,
// affine map to d_img.
// ---------------------------------------------------------------------------

class ImageEncoder {
public:
    explicit ImageEncoder(const EncoderConfig& cfg);

    template <class T>
    struct Trace {
        std::vector<Vec<T>> inputs;  // input of each conv block
        std::vector<Vec<T>> pre;     // pre-activation of each block
        Vec<T> pooled;
    };

    template <class T>
    void declare(ParameterStore<T>& s) const {
        for (const auto& c : convs_) c.declare(s);
        proj_.declare(s);
    }

    // Spatial side length after each block.
    std::vector<int> block_sizes() const;

    template <class T>
    Vec<T> forward(const ParameterStore<T>& p, const Vec<T>& chw, Trace<T>* tr) const {
        if (chw.size() != std::size_t(3) * image_size_ * image_size_)
            throw usage_error("ShapeMismatch", "image does not match configured size " + std::to_string(image_size_));
        Vec<T> x = chw;
        int side = image_size_;
        Trace<T> local;
        Trace<T>& t = tr ? *tr : local;
        t.inputs.clear();
        t.pre.clear();
        for (const auto& conv : convs_) {
            Vec<T> pre = conv.forward<T>(p, x, side, side);
            side = (side - 1) / 2 + 1;
            Vec<T> act(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) act[i] = nn::leaky_relu(pre[i]);
            if (tr) {
                t.inputs.push_back(std::move(x));
                t.pre.push_back(std::move(pre));
            }
            x = std::move(act);
        }
        const int ch = convs_.back().out;
        const std::size_t plane = std::size_t(side) * side;
        t.pooled.assign(std::size_t(ch), T(0));
        for (int c = 0; c < ch; ++c) {
            T s = 0;
            for (std::size_t i = 0; i < plane; ++i) s += x[std::size_t(c) * plane + i];
            t.pooled[std::size_t(c)] = s / T(plane);
        }
        return proj_.forward<T>(p, t.pooled);
    }

    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, const Trace<T>& tr, std::span<const T> dfeat) const {
        Vec<T> dpooled(tr.pooled.size(), T(0));
        proj_.backward<T>(p, g, tr.pooled, dfeat, dpooled);
        const auto sizes = block_sizes();
        const int last = static_cast<int>(convs_.size()) - 1;
        const std::size_t plane = std::size_t(sizes.back()) * sizes.back();
        Vec<T> dact(dpooled.size() * plane);
        for (std::size_t c = 0; c < dpooled.size(); ++c)
            for (std::size_t i = 0; i < plane; ++i) dact[c * plane + i] = dpooled[c] / T(plane);
        for (int b = last; b >= 0; --b) {
            const auto& pre = tr.pre[std::size_t(b)];
            for (std::size_t i = 0; i < pre.size(); ++i) dact[i] *= nn::leaky_relu_grad(pre[i]);
            const int in_side = b == 0 ? image_size_ : sizes[std::size_t(b - 1)];
            Vec<T> dx;
            if (b > 0) dx.assign(tr.inputs[std::size_t(b)].size(), T(0));
            convs_[std::size_t(b)].backward<T>(p, g, tr.inputs[std::size_t(b)], in_side, in_side, dact, dx);
            dact = std::move(dx);
        }
    }

    int out_dim() const { return proj_.out; }

private:
    int image_size_;
    std::vector<nn::Conv3x3> convs_;
    nn::Linear proj_;
};

// ---------------------------------------------------------------------------
// Hierarchical text encoder. Word level: bidirectional GRU over the real
// tokens of each sentence, attention pooled into a sentence vector. Sentence
// level: bidirectional GRU over the real sentences, attention pooled into the
// text feature. At both levels the attention query is an affine projection of
// the image feature. Masked positions are skipped entirely.
// ---------------------------------------------------------------------------

class TextEncoder {
public:
    explicit TextEncoder(const EncoderConfig& cfg);

    template <class T>
    struct BiTrace {
        nn::GruTrace<T> fwd, bwd;
        Vec<T> states;  // steps x 2H
    };

    template <class T>
    struct SentenceTrace {
        int row = 0;
        std::vector<int> cols;  // real word positions
        BiTrace<T> bi;
        nn::AttentionTrace<T> attn;
    };

    template <class T>
    struct Trace {
        Vec<T> word_query, sent_query;
        std::vector<SentenceTrace<T>> sentences;  // real sentences only
        Vec<T> sentence_vectors;                  // n x 2H
        BiTrace<T> bi;
        nn::AttentionTrace<T> attn;
    };

    template <class T>
    void declare(ParameterStore<T>& s) const {
        word_f_.declare(s);
        word_b_.declare(s);
        word_attn_.declare(s);
        word_query_.declare(s);
        sent_f_.declare(s);
        sent_b_.declare(s);
        sent_attn_.declare(s);
        sent_query_.declare(s);
    }

    int out_dim() const { return 2 * hidden_; }

    template <class T>
    Vec<T> forward(const ParameterStore<T>& p, const TokenGrid& grid, std::span<const T> img_feat, Trace<T>* tr) const {
        if (grid.rows != max_sentences_ || grid.cols != max_words_)
            throw usage_error("ShapeMismatch", "token grid is " + std::to_string(grid.rows) + "x" +
                                                   std::to_string(grid.cols) + ", expected " +
                                                   std::to_string(max_sentences_) + "x" + std::to_string(max_words_));
        Trace<T> local;
        Trace<T>& t = tr ? *tr : local;
        auto table = p.get(kEmbeddingTable);
        const std::size_t W = std::size_t(2 * hidden_);
        t.word_query = word_query_.forward<T>(p, img_feat);
        t.sent_query = sent_query_.forward<T>(p, img_feat);
        t.sentences.clear();
        t.sentence_vectors.clear();
        for (int r = 0; r < grid.rows; ++r) {
            SentenceTrace<T> st;
            st.row = r;
            for (int c = 0; c < grid.cols; ++c)
                if (grid.real(r, c)) st.cols.push_back(c);
            if (st.cols.empty()) continue;
            auto inputs = word_inputs<T>(table, grid, st);
            st.bi = bi_forward<T>(p, word_f_, word_b_, inputs);
            Vec<T> vec(W);
            st.attn = word_attn_.forward<T>(p, state_spans(st.bi), t.word_query, vec);
            t.sentence_vectors.insert(t.sentence_vectors.end(), vec.begin(), vec.end());
            t.sentences.push_back(std::move(st));
        }
        Vec<T> out(W, T(0));
        if (t.sentences.empty()) return out;
        std::vector<std::span<const T>> sent_inputs;
        for (std::size_t k = 0; k < t.sentences.size(); ++k)
            sent_inputs.emplace_back(t.sentence_vectors.data() + k * W, W);
        t.bi = bi_forward<T>(p, sent_f_, sent_b_, sent_inputs);
        t.attn = sent_attn_.forward<T>(p, state_spans(t.bi), t.sent_query, out);
        return out;
    }

    // Accumulates into dimg; embedding-row gradients only when `train_embeddings`.
    template <class T>
    void backward(const ParameterStore<T>& p, ParameterStore<T>& g, const TokenGrid& grid, std::span<const T> img_feat,
                  const Trace<T>& t, std::span<const T> dfeat, std::span<T> dimg) const {
        if (t.sentences.empty()) return;
        const std::size_t W = std::size_t(2 * hidden_);
        const std::size_t n = t.sentences.size();
        auto table = p.get(kEmbeddingTable);

        Vec<T> dsent_query(std::size_t(attn_size_), T(0));
        Vec<T> dstates(n * W, T(0));
        sent_attn_.backward<T>(p, g, state_spans(t.bi), t.sent_query, t.attn, dfeat, mut_spans(dstates, n, W),
                               dsent_query);
        std::vector<std::span<const T>> sent_inputs;
        for (std::size_t k = 0; k < n; ++k) sent_inputs.emplace_back(t.sentence_vectors.data() + k * W, W);
        Vec<T> dvectors(n * W, T(0));
        bi_backward<T>(p, g, sent_f_, sent_b_, sent_inputs, t.bi, dstates, mut_spans(dvectors, n, W));

        Vec<T> dword_query(std::size_t(attn_size_), T(0));
        for (std::size_t k = 0; k < n; ++k) {
            const auto& st = t.sentences[k];
            const std::size_t m = st.cols.size();
            Vec<T> dws(m * W, T(0));
            word_attn_.backward<T>(p, g, state_spans(st.bi), t.word_query, st.attn,
                                   std::span<const T>(dvectors.data() + k * W, W), mut_spans(dws, m, W), dword_query);
            auto inputs = word_inputs<T>(table, grid, st);
            std::vector<std::span<T>> dinputs;
            if (train_embeddings_) {
                auto dtable = g.get(kEmbeddingTable);
                for (int c : st.cols)
                    dinputs.emplace_back(dtable.data() + std::size_t(grid.at(st.row, c)) * word_dim_,
                                         std::size_t(word_dim_));
            }
            bi_backward<T>(p, g, word_f_, word_b_, inputs, st.bi, dws, dinputs);
        }
        word_query_.backward<T>(p, g, img_feat, dword_query, dimg);
        sent_query_.backward<T>(p, g, img_feat, dsent_query, dimg);
    }

private:
    int hidden_, attn_size_, word_dim_, max_sentences_, max_words_;
    bool train_embeddings_;
    nn::Gru word_f_, word_b_, sent_f_, sent_b_;
    nn::AttentionPool word_attn_, sent_attn_;
    nn::Linear word_query_, sent_query_;

    template <class T>
    std::vector<std::span<const T>> word_inputs(std::span<const T> table, const TokenGrid& grid,
                                                const SentenceTrace<T>& st) const {
        std::vector<std::span<const T>> in;
        for (int c : st.cols)
            in.emplace_back(table.data() + std::size_t(grid.at(st.row, c)) * word_dim_, std::size_t(word_dim_));
        return in;
    }

    template <class T>
    static std::vector<std::span<const T>> state_spans(const BiTrace<T>& bi) {
        std::vector<std::span<const T>> out;
        const std::size_t W = std::size_t(2 * bi.fwd.hidden);
        for (int k = 0; k < bi.fwd.steps; ++k) out.emplace_back(bi.states.data() + std::size_t(k) * W, W);
        return out;
    }

    template <class T>
    static std::vector<std::span<T>> mut_spans(Vec<T>& v, std::size_t n, std::size_t w) {
        std::vector<std::span<T>> out;
        for (std::size_t k = 0; k < n; ++k) out.emplace_back(v.data() + k * w, w);
        return out;
    }

    template <class T>
    static BiTrace<T> bi_forward(const ParameterStore<T>& p, const nn::Gru& f, const nn::Gru& b,
                                 const std::vector<std::span<const T>>& inputs) {
        BiTrace<T> bt;
        const int n = static_cast<int>(inputs.size());
        const std::size_t H = std::size_t(f.hidden);
        bt.fwd = f.forward<T>(p, inputs);
        std::vector<std::span<const T>> rev(inputs.rbegin(), inputs.rend());
        bt.bwd = b.forward<T>(p, rev);
        bt.states.resize(std::size_t(n) * 2 * H);
        for (int t = 0; t < n; ++t) {
            auto hf = bt.fwd.state(t);
            auto hb = bt.bwd.state(n - 1 - t);
            std::copy(hf.begin(), hf.end(), bt.states.begin() + std::ptrdiff_t(std::size_t(t) * 2 * H));
            std::copy(hb.begin(), hb.end(), bt.states.begin() + std::ptrdiff_t(std::size_t(t) * 2 * H + H));
        }
        return bt;
    }

    template <class T>
    static void bi_backward(const ParameterStore<T>& p, ParameterStore<T>& g, const nn::Gru& f, const nn::Gru& b,
                            const std::vector<std::span<const T>>& inputs, const BiTrace<T>& bt,
                            const Vec<T>& dstates, const std::vector<std::span<T>>& dinputs) {
        const int n = static_cast<int>(inputs.size());
        const std::size_t H = std::size_t(f.hidden);
        Vec<T> df(std::size_t(n) * H), db(std::size_t(n) * H);
        for (int t = 0; t < n; ++t) {
            const T* d = dstates.data() + std::size_t(t) * 2 * H;
            std::copy(d, d + H, df.begin() + std::ptrdiff_t(std::size_t(t) * H));
            std::copy(d + H, d + 2 * H, db.begin() + std::ptrdiff_t(std::size_t(n - 1 - t) * H));
        }
        f.backward<T>(p, g, inputs, bt.fwd, df, dinputs);
        std::vector<std::span<const T>> rev(inputs.rbegin(), inputs.rend());
        std::vector<std::span<T>> drev(dinputs.rbegin(), dinputs.rend());
        b.backward<T>(p, g, rev, bt.bwd, db, drev);
    }
};

// Image part first.
template <class T>
Vec<T> fuse(std::span<const T> image_feat, std::span<const T> text_feat, int d_img, int d_txt) {
    if (static_cast<int>(image_feat.size()) != d_img || static_cast<int>(text_feat.size()) != d_txt)
        throw usage_error("WidthMismatch", "fuse expects widths " + std::to_string(d_img) + " + " +
                                               std::to_string(d_txt) + ", got " + std::to_string(image_feat.size()) +
                                               " + " + std::to_string(text_feat.size()));
    Vec<T> z(image_feat.begin(), image_feat.end());
    z.insert(z.end(), text_feat.begin(), text_feat.end());
    return z;
}

}  // namespace absnet
