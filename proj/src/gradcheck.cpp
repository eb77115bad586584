#include <cmath>

#include "absnet/errors.hpp"
#include "absnet/trainer.hpp"

namespace absnet {

GradCheckReport gradient_check(ParameterStore<double>& params, const LossProbe& probe,
                               const std::function<bool(const std::string&)>& select, double eps,
                               double analytic_scale) {
    GradCheckReport r;
    auto grads = params.zeros_like();
    probe(params, &grads);
    for (auto& e : params.entries()) {
        if (!select(e.name)) continue;
        const auto g = grads.get(e.name);
        for (std::size_t i = 0; i < e.values.size(); ++i) {
            const double saved = e.values[i];
            e.values[i] = saved + eps;
            const double fp = probe(params, nullptr);
            e.values[i] = saved - eps;
            const double fm = probe(params, nullptr);
            e.values[i] = saved;
            const double fd = (fp - fm) / (2 * eps);
            const double a = g[i] * analytic_scale;
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
            if (r.checked++ == 0 || rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst_entry = e.name;
                r.worst_index = i;
                r.worst_analytic = a;
                r.worst_numeric = fd;
            }
        }
    }
    return r;
}

const std::vector<std::string>& gradient_blocks() {
    static const std::vector<std::string> blocks{
        "image_cnn",    "word_gru_attn", "sentence_gru_attn", "image_decoder", "image_decoder_upsample",
        "text_decoder", "classifier",    "image_loss",        "text_loss",
    };
    return blocks;
}

namespace {

void randomize(ParameterStore<double>& s, Rng& rng, double scale = 0.5) {
    for (auto& e : s.entries())
        for (auto& v : e.values) v = rng.uniform(-scale, scale);
}

Vec<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    Vec<double> v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Token grid with a full row, a partial row and a fully masked row.
TokenGrid probe_grid(Rng& rng, int rows, int cols, int vocab_rows, const std::vector<int>& lengths) {
    TokenGrid g;
    g.rows = rows;
    g.cols = cols;
    g.ids.assign(std::size_t(rows) * cols, vocab_rows - 1);
    g.mask.assign(std::size_t(rows) * cols, 0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < lengths[std::size_t(r)]; ++c) {
            g.ids[std::size_t(r) * cols + c] = static_cast<int>(rng.index(std::size_t(vocab_rows - 1)));
            g.mask[std::size_t(r) * cols + c] = 1;
        }
    return g;
}

GradCheckReport image_cnn(Rng& rng, double k) {
    EncoderConfig ec;
    ec.image_size = 9;
    ec.cnn_channels = {3, 4};
    ec.d_img = 5;
    const ImageEncoder enc(ec);
    ParameterStore<double> p;
    enc.declare(p);
    randomize(p, rng);
    const auto x = random_vec(rng, 3 * 9 * 9);
    const auto c = random_vec(rng, 5);
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        ImageEncoder::Trace<double> tr;
        const auto f = enc.forward<double>(ps, x, &tr);
        if (g) enc.backward<double>(ps, *g, tr, c);
        return dot(f, c);
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

GradCheckReport text_encoder(Rng& rng, double k, const std::string& prefix) {
    EncoderConfig ec;
    ec.word_dim = 3;
    ec.gru_hidden = 2;
    ec.d_txt = 4;
    ec.attn_size = 3;
    ec.d_img = 4;
    ec.max_sentences = 3;
    ec.max_words = 4;
    ec.train_embeddings = true;
    const TextEncoder enc(ec);
    const int vocab_rows = 6;
    ParameterStore<double> p;
    p.add(kEmbeddingTable, {vocab_rows, 3});
    enc.declare(p);
    p.add("probe.img", {4});
    randomize(p, rng);
    const TokenGrid grid = probe_grid(rng, 3, 4, vocab_rows, {4, 2, 0});
    const auto c = random_vec(rng, 4);
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        TextEncoder::Trace<double> tr;
        const auto img = ps.get("probe.img");
        const auto f = enc.forward<double>(ps, grid, img, &tr);
        if (g) enc.backward<double>(ps, *g, grid, img, tr, c, g->get("probe.img"));
        return dot(f, c);
    };
    return gradient_check(
        p, probe,
        [&](const std::string& n) { return starts_with(n, prefix) || n == kEmbeddingTable || n == "probe.img"; },
        1e-5, k);
}

GradCheckReport image_decoder(Rng& rng, double k, bool upsample) {
    DecoderConfig dc;
    dc.embedding_dim = 8;
    dc.seed_channels = 2;
    dc.channels = {3, 2, 2, 3};
    if (upsample) {
        dc.seed_side = 2;
        dc.upsample = {1.5, 2.0, 2.0};
        dc.image_size = 12;
    } else {
        dc.seed_side = 10;
        dc.upsample = {1.0, 1.0, 1.0};
        dc.image_size = 10;
    }
    const ImageDecoder dec(dc);
    ParameterStore<double> p;
    dec.declare(p);
    p.add("probe.z", {8});
    randomize(p, rng);
    const auto c = random_vec(rng, std::size_t(3) * dc.image_size * dc.image_size);
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        ImageDecoder::Trace<double> tr;
        const auto z = ps.get("probe.z");
        const auto out = dec.forward<double>(ps, z, &tr);
        if (g) dec.backward<double>(ps, *g, z, tr, c, g->get("probe.z"));
        return dot(out, c);
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

GradCheckReport text_decoder(Rng& rng, double k) {
    DecoderConfig dc;
    dc.embedding_dim = 8;
    dc.sent_hidden = 3;
    dc.word_hidden = 3;
    dc.word_dim = 4;
    dc.max_sentences = 2;
    dc.max_words = 3;
    const TextDecoder dec(dc);
    ParameterStore<double> p;
    dec.declare(p);
    p.add("probe.z", {8});
    randomize(p, rng);
    const std::vector<int> steps{3, 2};
    std::vector<Vec<double>> c{random_vec(rng, 3 * 4), random_vec(rng, 2 * 4)};
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        TextDecoder::Trace<double> tr;
        const auto z = ps.get("probe.z");
        dec.forward<double>(ps, z, steps, tr);
        double loss = 0;
        for (std::size_t r = 0; r < steps.size(); ++r) loss += dot(tr.sentences[r].words, c[r]);
        if (g) dec.backward<double>(ps, *g, z, tr, c, g->get("probe.z"));
        return loss;
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

GradCheckReport classifier(Rng& rng, double k) {
    ClassifierConfig cc;
    cc.embedding_dim = 8;
    cc.hidden = 8;
    const Classifier cls(cc);
    ParameterStore<double> p;
    cls.declare(p);
    p.add("probe.z", {8});
    randomize(p, rng);
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        Classifier::Trace<double> tr;
        const auto z = ps.get("probe.z");
        const auto logits = cls.logits<double>(ps, z, &tr);
        Vec<double> dl(logits.size(), 0.0);
        const double loss = cross_entropy<double>(logits, 1, dl);
        if (g) cls.backward<double>(ps, *g, z, tr, dl, g->get("probe.z"));
        return loss;
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

GradCheckReport image_loss_block(Rng& rng, double k) {
    ParameterStore<double> p;
    p.add("probe.recon", {3, 4, 4});
    randomize(p, rng, 1.0);
    const auto original = random_vec(rng, 48);
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        return image_loss<double>(original, ps.get("probe.recon"),
                                  g ? g->get("probe.recon") : std::span<double>());
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

GradCheckReport text_loss_block(Rng& rng, double k) {
    const int vocab_rows = 6, dim = 4;
    ParameterStore<double> p;
    p.add("probe.pred", {2, 3, dim});
    randomize(p, rng, 1.0);
    const auto table = random_vec(rng, std::size_t(vocab_rows) * dim);
    const TokenGrid grid = probe_grid(rng, 2, 3, vocab_rows, {3, 1});
    LossProbe probe = [&](const ParameterStore<double>& ps, ParameterStore<double>* g) {
        return text_loss<double>(ps.get("probe.pred"), grid, table, dim,
                                 g ? g->get("probe.pred") : std::span<double>());
    };
    return gradient_check(p, probe, [](const std::string&) { return true; }, 1e-5, k);
}

}  // namespace

GradCheckReport check_block(const std::string& block, std::uint64_t seed, double k) {
    Rng rng(derive_seed(seed, "gradcheck/" + block));
    GradCheckReport r;
    if (block == "image_cnn")
        r = image_cnn(rng, k);
    else if (block == "word_gru_attn")
        r = text_encoder(rng, k, "enc.word.");
    else if (block == "sentence_gru_attn")
        r = text_encoder(rng, k, "enc.sent.");
    else if (block == "image_decoder")
        r = image_decoder(rng, k, false);
    else if (block == "image_decoder_upsample")
        r = image_decoder(rng, k, true);
    else if (block == "text_decoder")
        r = text_decoder(rng, k);
    else if (block == "classifier")
        r = classifier(rng, k);
    else if (block == "image_loss")
        r = image_loss_block(rng, k);
    else if (block == "text_loss")
        r = text_loss_block(rng, k);
    else
        throw usage_error("UnknownBlock", "unknown gradient block '" + block + "'");
    r.block = block;
    return r;
}

}  // namespace absnet
