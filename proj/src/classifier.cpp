#include "absnet/classifier.hpp"

#include <limits>

#include "absnet/errors.hpp"

namespace absnet {

Classifier::Classifier(const ClassifierConfig& cfg)
    : embedding_dim_(cfg.embedding_dim),
      fc0_{"cls.fc0", cfg.embedding_dim, cfg.hidden},
      fc1_{"cls.fc1", cfg.hidden, cfg.hidden},
      fc2_{"cls.fc2", cfg.hidden, cfg.classes} {}

void Classifier::check_width(std::size_t n) const {
    if (static_cast<int>(n) != embedding_dim_)
        throw usage_error("WidthMismatch", "classifier expects width " + std::to_string(embedding_dim_) + ", got " +
                                               std::to_string(n));
}

double classification_loss(const ClassProbabilities& probs, AbsLabel label) {
    const double p = probs[std::size_t(label)];
    return p > 0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

}  // namespace absnet
