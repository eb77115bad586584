#include "absnet/encoder.hpp"

namespace absnet {

ImageEncoder::ImageEncoder(const EncoderConfig& cfg) : image_size_(cfg.image_size) {
    int in = 3;
    for (std::size_t i = 0; i < cfg.cnn_channels.size(); ++i) {
        convs_.push_back(nn::Conv3x3{"enc.cnn." + std::to_string(i), in, cfg.cnn_channels[i], 2});
        in = cfg.cnn_channels[i];
    }
    if (convs_.empty()) throw usage_error("ConstraintViolation", "cnn_channels must not be empty");
    proj_ = nn::Linear{"enc.img.proj", in, cfg.d_img};
}

std::vector<int> ImageEncoder::block_sizes() const {
    std::vector<int> sizes;
    int side = image_size_;
    for (std::size_t i = 0; i < convs_.size(); ++i) sizes.push_back(side = (side - 1) / 2 + 1);
    return sizes;
}

TextEncoder::TextEncoder(const EncoderConfig& cfg)
    : hidden_(cfg.gru_hidden),
      attn_size_(cfg.attn_size),
      word_dim_(cfg.word_dim),
      max_sentences_(cfg.max_sentences),
      max_words_(cfg.max_words),
      train_embeddings_(cfg.train_embeddings),
      word_f_{"enc.word.gru_f", cfg.word_dim, cfg.gru_hidden},
      word_b_{"enc.word.gru_b", cfg.word_dim, cfg.gru_hidden},
      sent_f_{"enc.sent.gru_f", 2 * cfg.gru_hidden, cfg.gru_hidden},
      sent_b_{"enc.sent.gru_b", 2 * cfg.gru_hidden, cfg.gru_hidden},
      word_attn_{nn::Linear{"enc.word.attn", 2 * cfg.gru_hidden, cfg.attn_size}},
      sent_attn_{nn::Linear{"enc.sent.attn", 2 * cfg.gru_hidden, cfg.attn_size}},
      word_query_{"enc.word.query", cfg.d_img, cfg.attn_size},
      sent_query_{"enc.sent.query", cfg.d_img, cfg.attn_size} {}

}  // namespace absnet
