#include "absnet/decoder.hpp"

namespace absnet {

ImageDecoder::ImageDecoder(const DecoderConfig& cfg)
    : embedding_dim_(cfg.embedding_dim), seed_channels_(cfg.seed_channels), sizes_(cfg.stage_sizes()) {
    if (cfg.channels.size() != cfg.upsample.size() + 1)
        throw usage_error("ConstraintViolation", "dec_channels needs one entry more than upsample");
    if (cfg.channels.back() != 3) throw usage_error("ConstraintViolation", "final decoder channel count must be 3");
    seed_ = nn::Linear{"dec.img.seed", cfg.embedding_dim, cfg.seed_channels * cfg.seed_side * cfg.seed_side};
    int in = cfg.seed_channels;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        convs_.push_back(nn::Conv3x3{"dec.img.conv" + std::to_string(i), in, cfg.channels[i], 1});
        in = cfg.channels[i];
    }
}

void ImageDecoder::check_width(std::size_t n) const {
    if (static_cast<int>(n) != embedding_dim_)
        throw usage_error("WidthMismatch", "image decoder expects width " + std::to_string(embedding_dim_) +
                                               ", got " + std::to_string(n));
}

TextDecoder::TextDecoder(const DecoderConfig& cfg)
    : embedding_dim_(cfg.embedding_dim),
      max_sentences_(cfg.max_sentences),
      max_words_(cfg.max_words),
      init_{"dec.txt.init", cfg.embedding_dim, cfg.sent_hidden},
      sent_{"dec.txt.sent", cfg.embedding_dim, cfg.sent_hidden},
      sent_ln_{"dec.txt.sent_ln", cfg.sent_hidden},
      word_init_{"dec.txt.word_init", cfg.sent_hidden, cfg.word_hidden},
      word_{"dec.txt.word", cfg.sent_hidden, cfg.word_hidden},
      word_ln_{"dec.txt.word_ln", cfg.word_hidden},
      out_{"dec.txt.out", cfg.word_hidden, cfg.word_dim} {}

void TextDecoder::check_width(std::size_t n) const {
    if (static_cast<int>(n) != embedding_dim_)
        throw usage_error("WidthMismatch", "text decoder expects width " + std::to_string(embedding_dim_) +
                                               ", got " + std::to_string(n));
}

std::vector<int> unroll_lengths(const TokenGrid& grid) {
    std::vector<int> steps(std::size_t(grid.rows), 0);
    int last_row = -1;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c)
            if (grid.real(r, c)) {
                steps[std::size_t(r)] = c + 1;
                last_row = r;
            }
    steps.resize(std::size_t(last_row + 1));
    return steps;
}

std::string nearest_token(std::span<const float> v, const EmbeddingTable& table, const Vocabulary& vocab) {
    if (table.rows == 0) throw usage_error("InvalidArgument", "empty embedding table");
    int best = -1;
    double best_cos = 0;
    for (int id = 0; id < table.rows; ++id) {
        if (id == vocab.pad_id()) continue;
        auto row = table.row(id);
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            ab += double(v[k]) * row[k];
            aa += double(v[k]) * v[k];
            bb += double(row[k]) * row[k];
        }
        const double c = aa > 0 && bb > 0 ? ab / (std::sqrt(aa) * std::sqrt(bb)) : 0.0;
        if (best < 0 || c > best_cos || (c == best_cos && vocab.token(id) < vocab.token(best))) {
            best = id;
            best_cos = c;
        }
    }
    return vocab.token(best);
}

}  // namespace absnet
