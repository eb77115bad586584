#pragma once

// Whole-network plumbing: parameter layout and initialisation, per-sample
// encode / autoencoder / classifier passes with their backward passes.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "absnet/classifier.hpp"
#include "absnet/config.hpp"
#include "absnet/decoder.hpp"
#include "absnet/encoder.hpp"
#include "absnet/rng.hpp"
#include "absnet/vocab.hpp"

namespace absnet {

// Model input for one pair.
struct Sample {
    std::string pair_id;
    std::vector<float> chw;             // 3 x S x S, [-1, 1]
    std::vector<float> image_features;  // d_img; external features only
    TokenGrid grid;
    int label = -1;  // class index, -1 = unlabelled
};

enum Part : unsigned {
    kPartEncoder = 1u,     // image CNN (desk backbone), text encoder, embedding table
    kPartDecoder = 2u,
    kPartClassifier = 4u,
};

inline bool is_encoder_param(const std::string& n) { return starts_with(n, "enc.") || starts_with(n, "emb."); }
inline bool is_decoder_param(const std::string& n) { return starts_with(n, "dec."); }
inline bool is_classifier_param(const std::string& n) { return starts_with(n, "cls."); }

template <class T>
struct AutoencoderLosses {
    T image_mse = 0;
    T text_cosine = 0;
    T combined = 0;
};

class Model {
public:
    explicit Model(const RunConfig& cfg);

    const RunConfig& config() const { return cfg_; }
    bool desk_backbone() const { return cfg_.enc.backbone == ImageBackbone::DeskCnn; }
    int embedding_dim() const { return cfg_.enc.d_img + cfg_.enc.d_txt; }

    const ImageEncoder& image_encoder() const { return img_enc_; }
    const TextEncoder& text_encoder() const { return txt_enc_; }
    const ImageDecoder& image_decoder() const { return img_dec_; }
    const TextDecoder& text_decoder() const { return txt_dec_; }
    const Classifier& classifier() const { return cls_; }

    // Zero-valued store with the entries of `parts`, in a fixed order.
    template <class T>
    ParameterStore<T> declare(unsigned parts, int vocab_rows) const {
        ParameterStore<T> s;
        if (parts & kPartEncoder) {
            s.add(kEmbeddingTable, {vocab_rows, cfg_.enc.word_dim});
            if (desk_backbone()) img_enc_.declare(s);
            txt_enc_.declare(s);
        }
        if (parts & kPartDecoder) {
            img_dec_.declare(s);
            txt_dec_.declare(s);
        }
        if (parts & kPartClassifier) cls_.declare(s);
        return s;
    }

    // Glorot-uniform weights, zero biases, unit layer-norm gains, LSTM
    // forget-gate bias 1. Each entry draws from its own name-derived stream,
    // so values do not depend on which other parts are present. The
    // embedding table is left untouched.
    template <class T>
    static void initialize(ParameterStore<T>& s, std::uint64_t seed,
                           const std::function<bool(const std::string&)>& select = {}) {
        for (auto& e : s.entries()) {
            if (e.name == kEmbeddingTable || (select && !select(e.name))) continue;
            auto& v = e.values;
            std::fill(v.begin(), v.end(), T(0));
            const auto ends = [&](const char* suffix) {
                const std::string sfx = suffix;
                return e.name.size() >= sfx.size() && e.name.compare(e.name.size() - sfx.size(), sfx.size(), sfx) == 0;
            };
            if (ends(".gain")) {
                std::fill(v.begin(), v.end(), T(1));
            } else if (ends(".w") || ends(".wx") || ends(".wh")) {
                double fan_in = 1, fan_out = e.shape[0];
                for (std::size_t k = 1; k < e.shape.size(); ++k) fan_in *= e.shape[k];
                if (e.shape.size() == 4) fan_out *= e.shape[2] * e.shape[3];
                if (ends(".wx") || ends(".wh")) {
                    // stacked gates: fan_out is one gate's width
                    const int gates = e.name.find(".gru_") != std::string::npos ? 3 : 4;
                    fan_out /= gates;
                }
                const double limit = std::sqrt(6.0 / (fan_in + fan_out));
                Rng rng(derive_seed(seed, e.name));
                for (auto& x : v) x = static_cast<T>(rng.uniform(-limit, limit));
            } else if (ends(".b") && e.shape.size() == 1 && is_lstm(e.name)) {
                const std::size_t H = v.size() / 4;
                for (std::size_t k = H; k < 2 * H; ++k) v[k] = T(1);
            }
        }
    }

    template <class T>
    void load_embeddings(ParameterStore<T>& s, const EmbeddingTable& table) const {
        auto dst = s.get(kEmbeddingTable);
        if (dst.size() != table.values.size())
            throw usage_error("ShapeMismatch", "embedding table has " + std::to_string(table.rows) + "x" +
                                                   std::to_string(table.dim) + " values, store expects " +
                                                   shape_string(s.shape(kEmbeddingTable)));
        std::transform(table.values.begin(), table.values.end(), dst.begin(), [](float x) { return T(x); });
    }

    // ------------------------------------------------------------------
    // Encoder
    // ------------------------------------------------------------------

    template <class T>
    struct EncodeTrace {
        Vec<T> chw;
        typename ImageEncoder::template Trace<T> img;
        Vec<T> img_feat;
        typename TextEncoder::template Trace<T> txt;
        Vec<T> z;
    };

    template <class T>
    Vec<T> encode(const ParameterStore<T>& p, const Sample& s, EncodeTrace<T>* tr = nullptr) const {
        EncodeTrace<T> local;
        EncodeTrace<T>& t = tr ? *tr : local;
        if (desk_backbone()) {
            t.chw.assign(s.chw.begin(), s.chw.end());
            t.img_feat = img_enc_.forward<T>(p, t.chw, tr ? &t.img : nullptr);
        } else {
            if (static_cast<int>(s.image_features.size()) != cfg_.enc.d_img)
                throw data_error("MissingImageFeatures", "no external image features for " + s.pair_id);
            t.img_feat.assign(s.image_features.begin(), s.image_features.end());
        }
        const Vec<T> txt = txt_enc_.forward<T>(p, s.grid, t.img_feat, tr ? &t.txt : nullptr);
        t.z = fuse<T>(t.img_feat, txt, cfg_.enc.d_img, cfg_.enc.d_txt);
        return t.z;
    }

    template <class T>
    void encode_backward(const ParameterStore<T>& p, ParameterStore<T>& g, const Sample& s, const EncodeTrace<T>& t,
                         std::span<const T> dz) const {
        const std::size_t di = std::size_t(cfg_.enc.d_img);
        Vec<T> dimg(dz.begin(), dz.begin() + std::ptrdiff_t(di));
        txt_enc_.backward<T>(p, g, s.grid, t.img_feat, t.txt, dz.subspan(di), dimg);
        if (desk_backbone()) img_enc_.backward<T>(p, g, t.img, dimg);
    }

    // ------------------------------------------------------------------
    // Autoencoder
    // ------------------------------------------------------------------

    // Losses of one pair; with `g`, also accumulates gradients of
    // `scale * combined` into it. The text decoder is unrolled only as far as
    // the last real token, which leaves the loss unchanged.
    template <class T>
    AutoencoderLosses<T> autoencoder_pass(const ParameterStore<T>& p, ParameterStore<T>* g, const Sample& s,
                                          T scale = T(1)) const {
        EncodeTrace<T> et;
        const Vec<T> z = encode<T>(p, s, &et);
        const auto& tc = cfg_.train;
        AutoencoderLosses<T> out;

        typename ImageDecoder::template Trace<T> it;
        const Vec<T> recon = img_dec_.forward<T>(p, z, &it);
        if (s.chw.empty()) throw data_error("MissingImage", "no pixels for " + s.pair_id);
        const Vec<T> original(s.chw.begin(), s.chw.end());
        Vec<T> drecon(g ? recon.size() : 0, T(0));
        out.image_mse = image_loss<T>(original, recon, drecon);

        typename TextDecoder::template Trace<T> tt;
        txt_dec_.forward<T>(p, z, unroll_lengths(s.grid), tt);
        const int E = txt_dec_.output_dim();
        std::vector<Vec<T>> dwords(tt.sentences.size());
        for (std::size_t r = 0; r < tt.sentences.size(); ++r) dwords[r].assign(tt.sentences[r].words.size(), T(0));
        auto pred = [&](int r, int c) {
            return std::span<const T>(tt.sentences[std::size_t(r)].words.data() + std::size_t(c) * E, std::size_t(E));
        };
        auto grad = [&](int r, int c) {
            return std::span<T>(dwords[std::size_t(r)].data() + std::size_t(c) * E, std::size_t(E));
        };
        out.text_cosine = text_loss_impl<T>(s.grid, p.get(kEmbeddingTable), E, pred, grad, g != nullptr);
        out.combined = T(tc.w_img) * out.image_mse + T(tc.w_txt) * out.text_cosine;
        if (!g) return out;

        for (auto& v : drecon) v *= scale * T(tc.w_img);
        for (auto& d : dwords)
            for (auto& v : d) v *= scale * T(tc.w_txt);
        Vec<T> dz(z.size(), T(0));
        img_dec_.backward<T>(p, *g, z, it, drecon, dz);
        txt_dec_.backward<T>(p, *g, z, tt, dwords, dz);
        encode_backward<T>(p, *g, s, et, dz);
        return out;
    }

    // ------------------------------------------------------------------
    // Classifier
    // ------------------------------------------------------------------

    // Cross-entropy of one labelled pair; with `g`, accumulates gradients of
    // `scale * loss`, through the encoder when `train_encoder`. `z_cached`
    // (when non-empty) replaces the encoder pass and requires !train_encoder.
    template <class T>
    T classifier_pass(const ParameterStore<T>& p, ParameterStore<T>* g, const Sample& s, bool train_encoder,
                      T scale = T(1), std::span<const T> z_cached = {}, Vec<T>* probs = nullptr) const {
        if (s.label < 0 || s.label >= kNumClasses) throw data_error("MissingLabel", "pair " + s.pair_id + " is unlabelled");
        EncodeTrace<T> et;
        Vec<T> z;
        if (!z_cached.empty())
            z.assign(z_cached.begin(), z_cached.end());
        else
            z = encode<T>(p, s, train_encoder && g ? &et : nullptr);
        typename Classifier::template Trace<T> ct;
        const Vec<T> logits = cls_.logits<T>(p, z, &ct);
        if (probs) *probs = softmax<T>(logits);
        Vec<T> dlogits(logits.size(), T(0));
        const T loss = cross_entropy<T>(logits, s.label, g ? std::span<T>(dlogits) : std::span<T>());
        if (!g) return loss;
        for (auto& v : dlogits) v *= scale;
        Vec<T> dz(z.size(), T(0));
        cls_.backward<T>(p, *g, z, ct, dlogits, dz);
        if (train_encoder) encode_backward<T>(p, *g, s, et, dz);
        return loss;
    }

    template <class T>
    Vec<T> class_probabilities(const ParameterStore<T>& p, std::span<const T> z) const {
        return softmax<T>(cls_.logits<T>(p, z));
    }

private:
    RunConfig cfg_;
    ImageEncoder img_enc_;
    TextEncoder txt_enc_;
    ImageDecoder img_dec_;
    TextDecoder txt_dec_;
    Classifier cls_;

    static bool is_lstm(const std::string& name) {
        return name == "dec.txt.sent.b" || name == "dec.txt.word.b";
    }
};

// Converts a dataset pair. `features` (external backbone) may be null.
Sample make_sample(const ImageTextPair& pair, const Vocabulary& vocab, const RunConfig& cfg,
                   const std::vector<float>* features = nullptr);

}  // namespace absnet
