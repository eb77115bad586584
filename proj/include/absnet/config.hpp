#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace absnet {

enum class ImageBackbone { DeskCnn, ExternalFeatures };

struct EncoderConfig {
    int image_size = 60;
    int d_img = 256;
    int d_txt = 256;
    std::vector<int> cnn_channels{16, 32, 64, 128, 256};
    int gru_hidden = 128;  // per direction, both levels
    int attn_size = 128;
    ImageBackbone backbone = ImageBackbone::DeskCnn;
    int word_dim = 64;
    int max_sentences = 30;
    int max_words = 50;
    bool train_embeddings = false;

    int embedding_dim() const { return d_img + d_txt; }
};

struct DecoderConfig {
    int image_size = 60;
    int embedding_dim = 512;
    int seed_side = 6;
    int seed_channels = 32;
    std::vector<int> channels{32, 16, 8, 3};
    std::vector<double> upsample{2.5, 2.0, 2.0};
    int sent_hidden = 128;
    int word_hidden = 128;
    int word_dim = 64;
    int max_sentences = 30;
    int max_words = 50;

    // Spatial side after the seed and after each upsample stage.
    std::vector<int> stage_sizes() const;
};

struct ClassifierConfig {
    int embedding_dim = 512;
    int hidden = 512;
    int classes = 3;
};

enum class Regime { PretrainAe, ClScratch, ClFreeze, ClTransfer };

const char* regime_name(Regime r);
Regime parse_regime(const std::string& s);

struct TrainConfig {
    Regime regime = Regime::PretrainAe;
    int batch_size = 4;
    long max_iterations = 5000;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    double weight_decay = 0.0;
    double w_img = 1.0;
    double w_txt = 1.0;
    std::uint64_t seed = 1;
    long checkpoint_interval = 0;  // 0 = only at the end
    long log_interval = 100;
    bool deterministic = false;
    int threads = 0;  // 0 = runtime default
};

enum class Profile { Desk, PaperScale };

// Merged run configuration. Shared keys (image_size, word_dim, text caps,
// embedding width) are written through to every constituent config.
struct RunConfig {
    Profile profile = Profile::Desk;
    EncoderConfig enc;
    DecoderConfig dec;
    ClassifierConfig cls;
    TrainConfig train;
    int vocab_max = 2000;
    std::string vectors_path;   // optional word-vector file
    std::string features_path;  // external image features (index file)
    int embedding_declared = 0;  // "embedding" key; 0 = not declared

    static RunConfig defaults(Profile p);

    // Flat key/value view; `set` rejects unknown keys and malformed values.
    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_kv() const;

    // Throws ConstraintViolation.
    void validate() const;
};

Profile parse_profile(const std::string& s);
const char* profile_name(Profile p);

// Profile from ABSNET_PROFILE, desk when unset.
Profile default_profile();

// Every key accepted by RunConfig::set, in documentation order.
const std::vector<std::string>& config_keys();

// Profile defaults, then `key = value` lines from `path` (if non-empty), then
// `overrides` in order. Validates the result.
RunConfig load_config(const std::string& path, Profile profile,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

RunConfig parse_config_text(const std::string& text, Profile profile);

}  // namespace absnet
