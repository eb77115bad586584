#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "absnet/checkpoint.hpp"
#include "absnet/config.hpp"
#include "absnet/corpus.hpp"
#include "absnet/features.hpp"
#include "absnet/model.hpp"
#include "absnet/vocab.hpp"
#include "json.hpp"

namespace absnet {

struct TrainInputs {
    std::vector<const ImageTextPair*> pairs;
    const FeatureStore* features = nullptr;      // external backbone only
    const Vocabulary* vocab = nullptr;           // required without `init`
    const EmbeddingTable* embeddings = nullptr;  // required without `init`
    const Checkpoint* init = nullptr;            // required for cl_freeze / cl_transfer
};

struct TrainHooks {
    // Periodic checkpoints and the diagnostic checkpoint on NonFiniteLoss;
    // empty = none written.
    std::filesystem::path checkpoint_dir;
    std::function<void(const nlohmann::json&)> on_record;
};

// Applies the thread cap: one thread in deterministic mode, else `threads`
// when non-zero.
void apply_thread_policy(const TrainConfig& cfg);

// Throws MissingImageFeatures / ShapeMismatch.
std::vector<Sample> build_samples(const std::vector<const ImageTextPair*>& pairs, const Vocabulary& vocab,
                                  const RunConfig& cfg, const FeatureStore* features);

// Minimises w_img * image_mse + w_txt * text_cosine. Throws EmptyDataset,
// NonFiniteLoss.
Checkpoint pretrain_autoencoder(const TrainInputs& in, const RunConfig& cfg, const TrainHooks& hooks = {});

// Regime from cfg.train.regime. The result holds encoder + classifier
// parameters. Throws MissingInitCheckpoint, EmptyDataset, MissingLabel,
// NonFiniteLoss.
Checkpoint train_classifier(const TrainInputs& in, const RunConfig& cfg, const TrainHooks& hooks = {});

// Reshuffles (seeded) at every epoch boundary.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed);
    std::size_t next();
    long epoch() const { return epoch_; }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    long epoch_ = 0;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (double precision)
// ---------------------------------------------------------------------------

struct GradCheckReport {
    std::string block;
    double max_rel_error = 0;
    std::string worst_entry;
    std::size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
    std::size_t checked = 0;
};

// probe(params, grads): returns the loss; accumulates the analytic gradient
// when `grads` is non-null.
using LossProbe = std::function<double(const ParameterStore<double>&, ParameterStore<double>*)>;

// Central differences on every element of the selected entries; relative
// error |a - f| / max(|a|, |f|, 1e-8). `analytic_scale` multiplies the
// analytic gradient (sensitivity testing).
GradCheckReport gradient_check(ParameterStore<double>& params, const LossProbe& probe,
                               const std::function<bool(const std::string&)>& select, double eps = 1e-5,
                               double analytic_scale = 1.0);

// image_cnn, word_gru_attn, sentence_gru_attn, image_decoder,
// image_decoder_upsample, text_decoder, classifier, image_loss, text_loss.
const std::vector<std::string>& gradient_blocks();

// Tiny-configuration probe of one block. Throws UnknownBlock.
GradCheckReport check_block(const std::string& block, std::uint64_t seed = 7, double analytic_scale = 1.0);

}  // namespace absnet
