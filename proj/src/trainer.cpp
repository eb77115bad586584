#include "absnet/trainer.hpp"

#include <cmath>
#include <numeric>

#include "absnet/errors.hpp"
#include "absnet/kernels.hpp"
#include "absnet/optim.hpp"

namespace absnet {

using nlohmann::json;

void apply_thread_policy(const TrainConfig& cfg) {
    if (cfg.deterministic)
        kernels::set_threads(1);
    else if (cfg.threads > 0)
        kernels::set_threads(cfg.threads);
}

std::vector<Sample> build_samples(const std::vector<const ImageTextPair*>& pairs, const Vocabulary& vocab,
                                  const RunConfig& cfg, const FeatureStore* features) {
    const bool external = cfg.enc.backbone == ImageBackbone::ExternalFeatures;
    std::vector<Sample> out;
    out.reserve(pairs.size());
    for (const auto* p : pairs) {
        const std::vector<float>* f = nullptr;
        if (external) {
            f = features ? features->find(p->pair_id) : nullptr;
            if (!f) throw data_error("MissingImageFeatures", "no external image features for " + p->pair_id);
        }
        out.push_back(make_sample(*p, vocab, cfg, f));
    }
    return out;
}

BatchSampler::BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
}

std::size_t BatchSampler::next() {
    if (cursor_ == order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
        ++epoch_;
    }
    return order_[cursor_++];
}

namespace {

struct Window {
    long n = 0;
    double image_mse = 0, text_cosine = 0, combined = 0, cls_loss = 0;
    long correct = 0, seen = 0;

    void reset() { *this = Window{}; }
};

json nullable(bool present, double v) { return present ? json(v) : json(nullptr); }

void emit(Checkpoint& ck, const TrainHooks& hooks, json rec) {
    ck.history.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
}

[[noreturn]] void abort_non_finite(Checkpoint& ck, const TrainHooks& hooks, long it, const std::string& what) {
    ck.iteration = it;
    std::string where;
    if (!hooks.checkpoint_dir.empty()) {
        const auto dir = hooks.checkpoint_dir / "diagnostic";
        save_checkpoint(ck, dir);
        where = "; diagnostic checkpoint at " + dir.string();
    }
    throw numeric_error("NonFiniteLoss", what + " at iteration " + std::to_string(it) + where);
}

void maybe_checkpoint(const Checkpoint& ck, const TrainHooks& hooks, const TrainConfig& tc, long it) {
    if (hooks.checkpoint_dir.empty() || tc.checkpoint_interval <= 0 || it % tc.checkpoint_interval != 0) return;
    save_checkpoint(ck, hooks.checkpoint_dir / ("iter-" + std::to_string(it)));
}

}  // namespace

Checkpoint pretrain_autoencoder(const TrainInputs& in, const RunConfig& cfg, const TrainHooks& hooks) {
    if (cfg.train.regime != Regime::PretrainAe)
        throw usage_error("InvalidRegime", std::string("pretraining needs regime pretrain_ae, got ") +
                                               regime_name(cfg.train.regime));
    if (in.pairs.empty()) throw data_error("EmptyDataset", "no training pairs");
    if (!in.vocab || !in.embeddings) throw usage_error("InvalidArgument", "pretraining needs a vocabulary and embeddings");
    apply_thread_policy(cfg.train);
    const auto& tc = cfg.train;
    const Model model(cfg);

    Checkpoint ck;
    ck.config = cfg;
    ck.vocab = *in.vocab;
    ck.params = model.declare<float>(kPartEncoder | kPartDecoder, in.vocab->size());
    Model::initialize(ck.params, derive_seed(tc.seed, "init"));
    model.load_embeddings(ck.params, *in.embeddings);

    const auto samples = build_samples(in.pairs, *in.vocab, cfg, in.features);
    auto grads = ck.params.zeros_like();
    Adam adam(ck.params, tc);
    const bool train_emb = cfg.enc.train_embeddings;
    const auto select = [train_emb](const std::string& n) { return n != kEmbeddingTable || train_emb; };
    BatchSampler sampler(samples.size(), derive_seed(tc.seed, "shuffle/pretrain"));
    const float scale = 1.0f / float(tc.batch_size);

    Window w;
    for (long it = 1; it <= tc.max_iterations; ++it) {
        grads.zero();
        double mse = 0, cosl = 0, comb = 0;
        for (int b = 0; b < tc.batch_size; ++b) {
            const auto l = model.autoencoder_pass<float>(ck.params, &grads, samples[sampler.next()], scale);
            mse += l.image_mse;
            cosl += l.text_cosine;
            comb += l.combined;
        }
        mse /= tc.batch_size;
        cosl /= tc.batch_size;
        comb /= tc.batch_size;
        if (!std::isfinite(comb)) abort_non_finite(ck, hooks, it, "combined loss " + std::to_string(comb));
        const double gnorm = adam.step(ck.params, grads, select);
        if (!std::isfinite(gnorm)) abort_non_finite(ck, hooks, it, "gradient norm " + std::to_string(gnorm));
        ++w.n;
        w.image_mse += mse;
        w.text_cosine += cosl;
        w.combined += comb;
        if (it % tc.log_interval == 0 || it == tc.max_iterations) {
            emit(ck, hooks,
                 json{{"iteration", it},
                      {"regime", regime_name(tc.regime)},
                      {"image_mse", w.image_mse / double(w.n)},
                      {"text_cosine", w.text_cosine / double(w.n)},
                      {"combined", w.combined / double(w.n)},
                      {"classifier_loss", nullptr},
                      {"accuracy", nullptr},
                      {"epoch", sampler.epoch()}});
            w.reset();
        }
        ck.iteration = it;
        maybe_checkpoint(ck, hooks, tc, it);
    }
    return ck;
}

Checkpoint train_classifier(const TrainInputs& in, const RunConfig& cfg, const TrainHooks& hooks) {
    const auto& tc = cfg.train;
    if (tc.regime == Regime::PretrainAe) throw usage_error("InvalidRegime", "classifier training needs a cl_* regime");
    const bool freeze = tc.regime == Regime::ClFreeze;
    if ((freeze || tc.regime == Regime::ClTransfer) && !in.init)
        throw usage_error("MissingInitCheckpoint", std::string(regime_name(tc.regime)) + " needs an --init checkpoint");
    if (in.pairs.empty()) throw data_error("EmptyDataset", "no labelled training pairs");
    const bool use_init = in.init && tc.regime != Regime::ClScratch;
    if (!use_init && (!in.vocab || !in.embeddings))
        throw usage_error("InvalidArgument", "cl_scratch needs a vocabulary and embeddings");
    apply_thread_policy(tc);
    const Model model(cfg);

    Checkpoint ck;
    ck.config = cfg;
    ck.vocab = use_init ? in.init->vocab : *in.vocab;
    ck.params = model.declare<float>(kPartEncoder | kPartClassifier, ck.vocab.size());
    Model::initialize(ck.params, derive_seed(tc.seed, "init"));
    if (use_init)
        restore_entries(ck.params, in.init->params, is_encoder_param);
    else
        model.load_embeddings(ck.params, *in.embeddings);

    const auto samples = build_samples(in.pairs, ck.vocab, cfg, in.features);
    for (const auto& s : samples)
        if (s.label < 0) throw data_error("MissingLabel", "pair " + s.pair_id + " is unlabelled");

    // Frozen encoder: embeddings computed once.
    std::vector<Vec<float>> cached;
    if (freeze) {
        cached.reserve(samples.size());
        for (const auto& s : samples) cached.push_back(model.encode<float>(ck.params, s));
    }

    auto grads = ck.params.zeros_like();
    Adam adam(ck.params, tc);
    const bool train_emb = cfg.enc.train_embeddings;
    const auto select = [freeze, train_emb](const std::string& n) {
        if (is_classifier_param(n)) return true;
        if (freeze) return false;
        return is_encoder_param(n) && (n != kEmbeddingTable || train_emb);
    };
    BatchSampler sampler(samples.size(), derive_seed(tc.seed, std::string("shuffle/") + regime_name(tc.regime)));
    const float scale = 1.0f / float(tc.batch_size);

    Window w;
    Vec<float> probs;
    for (long it = 1; it <= tc.max_iterations; ++it) {
        grads.zero();
        double loss = 0;
        for (int b = 0; b < tc.batch_size; ++b) {
            const std::size_t i = sampler.next();
            std::span<const float> z = freeze ? std::span<const float>(cached[i]) : std::span<const float>();
            loss += model.classifier_pass<float>(ck.params, &grads, samples[i], !freeze, scale, z, &probs);
            w.correct += static_cast<int>(argmax_label<float>(probs)) == samples[i].label;
            ++w.seen;
        }
        loss /= tc.batch_size;
        if (!std::isfinite(loss)) abort_non_finite(ck, hooks, it, "classifier loss " + std::to_string(loss));
        const double gnorm = adam.step(ck.params, grads, select);
        if (!std::isfinite(gnorm)) abort_non_finite(ck, hooks, it, "gradient norm " + std::to_string(gnorm));
        ++w.n;
        w.cls_loss += loss;
        if (it % tc.log_interval == 0 || it == tc.max_iterations) {
            emit(ck, hooks,
                 json{{"iteration", it},
                      {"regime", regime_name(tc.regime)},
                      {"image_mse", nullptr},
                      {"text_cosine", nullptr},
                      {"combined", nullptr},
                      {"classifier_loss", w.cls_loss / double(w.n)},
                      {"accuracy", nullable(w.seen > 0, double(w.correct) / double(w.seen))},
                      {"epoch", sampler.epoch()}});
            w.reset();
        }
        ck.iteration = it;
        maybe_checkpoint(ck, hooks, tc, it);
    }
    return ck;
}

}  // namespace absnet
