#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "absnet/kernels.hpp"
#include "absnet/model.hpp"
#include "support.hpp"

using namespace absnet;
using testing::random_vector;

namespace {

struct Fixture {
    RunConfig cfg = testing::tiny_config();
    Model model{cfg};
    std::vector<SyntheticPair> corpus = generate_synthetic_corpus(2, 5, 12);
    Vocabulary vocab;
    ParameterStore<double> params;

    Fixture() {
        std::vector<const TokenizedText*> texts;
        for (const auto& s : corpus) texts.push_back(&s.pair.text);
        vocab = build_vocab(texts, 40);
        params = model.declare<double>(kPartEncoder | kPartDecoder | kPartClassifier, vocab.size());
        Model::initialize(params, 3);
        const auto table = init_random_embeddings(vocab, cfg.enc.word_dim, 4);
        model.load_embeddings(params, table);
    }

    Sample sample(std::size_t i) const { return make_sample(corpus[i].pair, vocab, cfg); }
};

template <class T>
bool bit_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <class T>
bool bit_equal(const ParameterStore<T>& a, const ParameterStore<T>& b) {
    if (a.entries().size() != b.entries().size()) return false;
    for (std::size_t i = 0; i < a.entries().size(); ++i)
        if (!bit_equal(a.entries()[i].values, b.entries()[i].values)) return false;
    return true;
}

// Random ids written into every padded grid cell.
void scramble_padding(TokenGrid& g, Rng& rng, int vocab_size) {
    for (std::size_t i = 0; i < g.ids.size(); ++i)
        if (!g.mask[i]) g.ids[i] = static_cast<int>(rng.index(std::size_t(vocab_size)));
}

}  // namespace

TEST_CASE("attention weights over real positions sum to one at both levels") {
    Fixture f;
    for (std::size_t i = 0; i < f.corpus.size(); ++i) {
        const Sample s = f.sample(i);
        Model::EncodeTrace<double> tr;
        f.model.encode<double>(f.params, s, &tr);
        const auto& txt = tr.txt;
        int real_rows = 0;
        for (int r = 0; r < s.grid.rows; ++r) real_rows += s.grid.real(r, 0) ? 1 : 0;
        REQUIRE(static_cast<int>(txt.sentences.size()) == real_rows);
        for (const auto& st : txt.sentences) {
            REQUIRE(st.attn.weights.size() == st.cols.size());
            double sum = 0;
            for (double w : st.attn.weights) {
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-6);
        }
        double sum = 0;
        for (double w : txt.attn.weights) sum += w;
        CHECK(txt.attn.weights.size() == txt.sentences.size());
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("padded grid cells are inert in the forward pass, the losses and every gradient") {
    Fixture f;
    Rng rng(17);
    const auto fparams = f.params.cast<float>();
    kernels::set_threads(1);
    int tested = 0;
    for (std::size_t i = 0; i < f.corpus.size(); ++i) {
        const Sample a = f.sample(i);
        Sample b = a;
        scramble_padding(b.grid, rng, f.vocab.size());
        if (b.grid.ids == a.grid.ids) continue;  // grid fully real
        ++tested;

        CHECK(bit_equal(f.model.encode<float>(fparams, a), f.model.encode<float>(fparams, b)));

        auto ga = fparams.zeros_like(), gb = fparams.zeros_like();
        const auto la = f.model.autoencoder_pass<float>(fparams, &ga, a);
        const auto lb = f.model.autoencoder_pass<float>(fparams, &gb, b);
        CHECK(std::memcmp(&la.combined, &lb.combined, sizeof(float)) == 0);
        CHECK(bit_equal(ga, gb));

        ga.zero();
        gb.zero();
        const float ca = f.model.classifier_pass<float>(fparams, &ga, a, true);
        const float cb = f.model.classifier_pass<float>(fparams, &gb, b, true);
        CHECK(std::memcmp(&ca, &cb, sizeof(float)) == 0);
        CHECK(bit_equal(ga, gb));
    }
    CHECK(tested >= 3);
    kernels::set_threads(0);
}

TEST_CASE("an all-padding text yields a zero text feature; a padded row is skipped") {
    Fixture f;
    Sample s = f.sample(0);
    std::fill(s.grid.mask.begin(), s.grid.mask.end(), std::uint8_t(0));
    const auto z = f.model.encode<double>(f.params, s);
    REQUIRE(z.size() == 16);
    for (std::size_t k = 8; k < 16; ++k) CHECK(z[k] == 0.0);

    // moving an extra padded row in front changes nothing
    Sample a = f.sample(0);
    REQUIRE(!a.grid.real(a.grid.rows - 1, 0));
    Sample b = a;
    const int cols = b.grid.cols;
    std::rotate(b.grid.ids.rbegin(), b.grid.ids.rbegin() + cols, b.grid.ids.rend());
    std::rotate(b.grid.mask.rbegin(), b.grid.mask.rbegin() + cols, b.grid.mask.rend());
    REQUIRE(!b.grid.real(0, 0));
    CHECK(bit_equal(f.model.encode<double>(f.params, a), f.model.encode<double>(f.params, b)));
}

TEST_CASE("the fused embedding puts the image part first") {
    const std::vector<double> img{1, 2}, txt{3, 4, 5};
    CHECK(fuse<double>(img, txt, 2, 3) == std::vector<double>{1, 2, 3, 4, 5});
    CHECK_THROWS_AS(fuse<double>(img, txt, 3, 2), Error);
}

TEST_CASE("image decoder: stage sizes, zero parameters give a zero image") {
    Fixture f;
    const ImageDecoder& dec = f.model.image_decoder();
    CHECK(f.cfg.dec.stage_sizes() == std::vector<int>{3, 6, 12});
    CHECK(dec.output_size() == 12);
    auto zero = f.model.declare<double>(kPartDecoder, f.vocab.size());
    Rng rng(1);
    const auto z = random_vector<double>(rng, 16);
    const auto img = dec.forward<double>(zero, z, nullptr);
    CHECK(img.size() == std::size_t(3) * 12 * 12);
    for (double v : img) CHECK(v == 0.0);
    // initialised: outputs stay in tanh range
    for (double v : dec.forward<double>(f.params, z, nullptr)) CHECK(std::abs(v) < 1.0);
}

TEST_CASE("text decoder states are layer-normalised: zero mean, unit variance") {
    Fixture f;
    const TextDecoder& dec = f.model.text_decoder();
    Rng rng(2);
    const auto z = random_vector<double>(rng, 16);
    TextDecoder::Trace<double> t;
    dec.forward<double>(f.params, z, {5, 2, 4}, t);
    REQUIRE(t.sentences.size() == 3);
    const std::size_t Hs = 6, Hw = 6;
    // with gain 1 and bias 0 the row variance is var / (var + eps) = 1 - eps * inv_sd^2
    auto check_rows = [](const std::vector<double>& v, std::size_t width, const auto& ln) {
        REQUIRE(ln.size() * width == v.size());
        for (std::size_t r = 0; r * width < v.size(); ++r) {
            double mean = 0, var = 0;
            for (std::size_t k = 0; k < width; ++k) mean += v[r * width + k];
            mean /= double(width);
            for (std::size_t k = 0; k < width; ++k) var += (v[r * width + k] - mean) * (v[r * width + k] - mean);
            var /= double(width);
            CHECK(std::abs(mean) < 1e-12);
            const double want = 1.0 - nn::kLayerNormEps * ln[r].inv_sd * ln[r].inv_sd;
            CHECK(std::abs(var - want) < 1e-12);
            CHECK(std::abs(var - 1.0) < 1e-4);
        }
    };
    check_rows(t.features, Hs, t.ln);
    for (const auto& st : t.sentences) check_rows(st.normed, Hw, st.ln);
    CHECK(t.sentences[1].words.size() == 2 * std::size_t(f.cfg.enc.word_dim));

    // generation covers the full grid and agrees with the unrolled prefix
    const auto full = dec.generate<double>(f.params, z);
    CHECK(full.size() == std::size_t(4) * 5 * 6);
    for (std::size_t k = 0; k < t.sentences[0].words.size(); ++k) CHECK(full[k] == t.sentences[0].words[k]);
}

TEST_CASE("unroll lengths stop at the last real token of each sentence") {
    TokenGrid g{3, 4, std::vector<int>(12, 0), {1, 1, 0, 0, /**/ 1, 1, 1, 1, /**/ 0, 0, 0, 0}};
    CHECK(unroll_lengths(g) == std::vector<int>{2, 4});
    TokenGrid empty{2, 2, std::vector<int>(4, 0), std::vector<std::uint8_t>(4, 0)};
    CHECK(unroll_lengths(empty).empty());
}

TEST_CASE("image loss: zero on identity, symmetric, opposite extremes give 4") {
    Rng rng(3);
    const auto a = random_vector<double>(rng, 48), b = random_vector<double>(rng, 48);
    CHECK(image_loss<double>(a, a) == 0.0);
    CHECK(image_loss<double>(a, b) == image_loss<double>(b, a));
    const std::vector<double> lo(27, -1.0), hi(27, 1.0);
    CHECK(image_loss<double>(lo, hi) == 4.0);
    CHECK_THROWS_AS(image_loss<double>(lo, a), Error);
}

TEST_CASE("text loss: masked cells ignored, scale invariant, opposite vectors give 2") {
    const int E = 3;
    const std::vector<double> table{1, 0, 0, /**/ 0, 1, 0, /**/ 0, 0, 1};
    TokenGrid g{2, 2, {0, 1, 2, 2}, {1, 1, 1, 0}};
    Rng rng(4);
    auto pred = random_vector<double>(rng, 12);
    std::vector<double> grad(12, 0.0);
    const double base = text_loss<double>(pred, g, table, E, grad);
    // gradient is zero on the masked cell
    for (int k = 9; k < 12; ++k) CHECK(grad[std::size_t(k)] == 0.0);

    auto changed = pred;
    for (int k = 9; k < 12; ++k) changed[std::size_t(k)] = 100.0 * (k + 1);
    CHECK(text_loss<double>(changed, g, table, E) == base);

    auto scaled = pred;
    for (auto& v : scaled) v *= 7.5;
    CHECK(text_loss<double>(scaled, g, table, E) == doctest::Approx(base).epsilon(1e-12));

    // prediction = minus target everywhere: 1 - (-1)
    std::vector<double> opposite{-1, 0, 0, 0, -2, 0, 0, 0, -3, 9, 9, 9};
    CHECK(text_loss<double>(opposite, g, table, E) == doctest::Approx(2.0));
    // exact match
    std::vector<double> exact{1, 0, 0, 0, 1, 0, 0, 0, 1, 5, 5, 5};
    CHECK(text_loss<double>(exact, g, table, E) == doctest::Approx(0.0));
    // zero-norm predictions have cosine 0
    std::vector<double> zero(12, 0.0);
    CHECK(text_loss<double>(zero, g, table, E) == 1.0);

    TokenGrid none{1, 1, {0}, {0}};
    CHECK_THROWS_AS(text_loss<double>(std::vector<double>(3, 1.0), none, table, E), Error);
}

TEST_CASE("cosine gradient matches a central difference") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_vector<double>(rng, 5);
        const auto b = random_vector<double>(rng, 5);
        std::vector<double> g(5, 0.0);
        cosine<double>(a, b, 1.0, g);
        for (std::size_t k = 0; k < 5; ++k) {
            const double h = 1e-6, x = a[k];
            a[k] = x + h;
            const double up = cosine<double>(a, b);
            a[k] = x - h;
            const double dn = cosine<double>(a, b);
            a[k] = x;
            CHECK(g[k] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("nearest token: maximal cosine, padding excluded, lexicographic ties") {
    const auto t = TokenizedText{{{"b", "a", "c", "c"}}};
    const Vocabulary v = build_vocab({&t}, 10);  // c, a, b, <unk>, <pad>
    EmbeddingTable table{v.size(), 2, std::vector<float>(std::size_t(v.size()) * 2, 0.0f)};
    auto set = [&](const std::string& tok, float x, float y) {
        const int id = tok == kUnkToken ? v.unk_id() : v.id(tok);
        table.values[std::size_t(id) * 2] = x;
        table.values[std::size_t(id) * 2 + 1] = y;
    };
    set("c", 1, 0);
    set("a", 0, 1);
    set("b", 0, 2);  // same direction as a
    set(kUnkToken, -1, 0);
    const std::vector<float> up{0, 3}, right{5, 0.1f}, left{-1, 0};
    CHECK(nearest_token(up, table, v) == "a");
    CHECK(nearest_token(right, table, v) == "c");
    CHECK(nearest_token(left, table, v) == kUnkToken);
}

TEST_CASE("classifier head: softmax, stable cross-entropy, argmax ties to the lowest class") {
    const std::vector<double> logits{1.0, 2.0, 0.5};
    const auto p = softmax<double>(logits);
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
    std::vector<double> d(3, 0.0);
    const double ce = cross_entropy<double>(logits, 1, d);
    CHECK(ce == doctest::Approx(-std::log(p[1])));
    CHECK(d[0] == doctest::Approx(p[0]));
    CHECK(d[1] == doctest::Approx(p[1] - 1.0));

    const std::vector<double> huge{1000.0, 0.0, -1000.0};
    CHECK(std::isfinite(cross_entropy<double>(huge, 2)));
    CHECK(cross_entropy<double>(huge, 2) == doctest::Approx(2000.0));
    CHECK(cross_entropy<double>(huge, 0) == doctest::Approx(0.0));

    CHECK(argmax_label<double>(std::vector<double>{0.4, 0.4, 0.2}) == AbsLabel::ImageLessAbstract);
    CHECK(argmax_label<double>(std::vector<double>{0.2, 0.4, 0.4}) == AbsLabel::ImageMoreAbstract);
    CHECK(std::isinf(classification_loss({0.0, 1.0, 0.0}, AbsLabel::ImageLessAbstract)));
}

TEST_CASE("classifier pass rejects unlabelled samples; probabilities sum to one") {
    Fixture f;
    Sample s = f.sample(0);
    std::vector<double> probs;
    f.model.classifier_pass<double>(f.params, nullptr, s, false, 1.0, {}, &probs);
    CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0));
    s.label = -1;
    CHECK_THROWS_AS(f.model.classifier_pass<double>(f.params, nullptr, s, false), Error);
}

TEST_CASE("freezing via a cached embedding gives the same loss and no encoder gradient") {
    Fixture f;
    const Sample s = f.sample(2);
    const auto z = f.model.encode<double>(f.params, s);
    auto g1 = f.params.zeros_like(), g2 = f.params.zeros_like();
    const double a = f.model.classifier_pass<double>(f.params, &g1, s, false);
    const double b = f.model.classifier_pass<double>(f.params, &g2, s, false, 1.0, z);
    CHECK(a == b);
    CHECK(bit_equal(g1, g2));
    for (const auto& e : g1.entries())
        if (!is_classifier_param(e.name))
            for (double v : e.values) CHECK(v == 0.0);
}

TEST_CASE("initialisation is per-entry: adding parts leaves existing values unchanged") {
    Fixture f;
    auto enc = f.model.declare<double>(kPartEncoder, f.vocab.size());
    Model::initialize(enc, 3);
    for (const auto& e : enc.entries())
        if (e.name != kEmbeddingTable)
            CHECK(bit_equal(e.values, std::vector<double>(f.params.get(e.name).begin(), f.params.get(e.name).end())));
    // forget-gate bias is one, layer-norm gains are one
    const auto b = f.params.get("dec.txt.sent.b");
    const std::size_t H = b.size() / 4;
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(b[k] == (k >= H && k < 2 * H ? 1.0 : 0.0));
    for (double v : f.params.get("dec.txt.sent_ln.gain")) CHECK(v == 1.0);
}

TEST_CASE("samples must match the configured image size") {
    Fixture f;
    RunConfig other = f.cfg;
    other.set("image_size", "24");
    other.set("seed_side", "6");
    CHECK_THROWS_AS(make_sample(f.corpus[0].pair, f.vocab, other), Error);
}

TEST_CASE("paper-scale text path produces a 2400-wide embedding") {
    RunConfig cfg = RunConfig::defaults(Profile::PaperScale);
    cfg.set("image_backbone", "external_features");
    cfg.validate();
    Model model(cfg);
    const auto corpus = generate_synthetic_corpus(1, 1, 16);
    std::vector<const TokenizedText*> texts{&corpus[0].pair.text};
    const Vocabulary vocab = build_vocab(texts, 100);
    auto p = model.declare<float>(kPartEncoder, vocab.size());
    Model::initialize(p, 1);
    model.load_embeddings(p, init_random_embeddings(vocab, cfg.enc.word_dim, 1));
    Sample s;
    s.pair_id = "x";
    s.grid = encode_tokens(corpus[0].pair.text, vocab);
    s.image_features.assign(std::size_t(cfg.enc.d_img), 0.5f);
    const auto z = model.encode<float>(p, s);
    CHECK(z.size() == 2400);
    CHECK(model.embedding_dim() == 2400);
}
