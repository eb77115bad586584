#include "absnet/model.hpp"

namespace absnet {

Model::Model(const RunConfig& cfg)
    : cfg_(cfg), img_enc_(cfg.enc), txt_enc_(cfg.enc), img_dec_(cfg.dec), txt_dec_(cfg.dec), cls_(cfg.cls) {
    cfg.validate();
}

Sample make_sample(const ImageTextPair& pair, const Vocabulary& vocab, const RunConfig& cfg,
                   const std::vector<float>* features) {
    Sample s;
    s.pair_id = pair.pair_id;
    if (pair.image.height != cfg.enc.image_size || pair.image.width != cfg.enc.image_size)
        throw data_error("ShapeMismatch", "pair " + pair.pair_id + " image is " + std::to_string(pair.image.height) +
                                              "x" + std::to_string(pair.image.width) + ", configured " +
                                              std::to_string(cfg.enc.image_size));
    s.chw = image_to_chw<float>(pair.image);
    if (features) s.image_features = *features;
    s.grid = encode_tokens(pair.text, vocab, cfg.enc.max_sentences, cfg.enc.max_words);
    s.label = pair.label ? static_cast<int>(*pair.label) : -1;
    return s;
}

}  // namespace absnet
