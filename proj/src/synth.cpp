#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "absnet/corpus.hpp"
#include "absnet/errors.hpp"
#include "absnet/rng.hpp"

namespace absnet {

namespace {

struct Color {
    const char* name;
    std::uint8_t r, g, b;
};

constexpr std::array<Color, 7> kPalette{{
    {"red", 220, 40, 40},
    {"green", 40, 170, 60},
    {"blue", 40, 80, 220},
    {"yellow", 230, 200, 30},
    {"orange", 240, 130, 20},
    {"purple", 140, 50, 170},
    {"cyan", 30, 190, 200},
}};
constexpr Color kBlack{"black", 0, 0, 0};

constexpr std::array<const char*, 3> kKinds{"rectangle", "circle", "line"};

class Canvas {
public:
    explicit Canvas(int size) : img_{size, size, std::vector<std::uint8_t>(std::size_t(size) * size * 3, 255)} {}

    int size() const { return img_.width; }

    void rect(int x0, int y0, int x1, int y1, const Color& c, bool filled, int thick) {
        for (int y = std::max(0, y0); y <= std::min(size() - 1, y1); ++y)
            for (int x = std::max(0, x0); x <= std::min(size() - 1, x1); ++x) {
                bool border = x - x0 < thick || x1 - x < thick || y - y0 < thick || y1 - y < thick;
                if (filled || border) put(x, y, c);
            }
    }

    void circle(int cx, int cy, int r, const Color& c, bool filled, int thick) {
        for (int y = std::max(0, cy - r); y <= std::min(size() - 1, cy + r); ++y)
            for (int x = std::max(0, cx - r); x <= std::min(size() - 1, cx + r); ++x) {
                const double d = std::hypot(x - cx, y - cy);
                if (d > r) continue;
                if (filled || d > r - thick) put(x, y, c);
            }
    }

    void line(int x0, int y0, int x1, int y1, const Color& c, int thick) {
        const double dx = x1 - x0, dy = y1 - y0;
        const double len2 = dx * dx + dy * dy;
        const double half = thick / 2.0;
        const int pad = thick + 1;
        for (int y = std::max(0, std::min(y0, y1) - pad); y <= std::min(size() - 1, std::max(y0, y1) + pad); ++y)
            for (int x = std::max(0, std::min(x0, x1) - pad); x <= std::min(size() - 1, std::max(x0, x1) + pad); ++x) {
                double t = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double px = x0 + t * dx - x, py = y0 + t * dy - y;
                if (px * px + py * py <= half * half) put(x, y, c);
            }
    }

    const RgbImage& image() const { return img_; }

private:
    void put(int x, int y, const Color& c) {
        auto* p = &img_.data[(std::size_t(y) * img_.width + x) * 3];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    RgbImage img_;
};

// Shapes live on a coarse grid of `size / 20` pixel cells.
void draw_random(Canvas& canvas, Rng& rng, const char* kind, const Color& color, bool filled) {
    const int s = canvas.size();
    const int unit = std::max(1, s / 20);
    const int thick = std::max(1, s / 30);
    auto coord = [&](int lo, int hi) { return rng.range(lo, hi) * unit; };
    const std::string k = kind;
    if (k == "rectangle") {
        int x0 = coord(1, 12), y0 = coord(1, 12);
        int w = coord(3, 7), h = coord(3, 7);
        canvas.rect(x0, y0, std::min(s - 1, x0 + w), std::min(s - 1, y0 + h), color, filled, thick);
    } else if (k == "circle") {
        int r = coord(2, 4);
        int cx = coord(4, 16), cy = coord(4, 16);
        canvas.circle(cx, cy, r, color, filled, thick);
    } else {
        int x0 = coord(1, 18), y0 = coord(1, 18);
        int x1 = coord(1, 18), y1 = coord(1, 18);
        if (x0 == x1 && y0 == y1) x1 = std::min(s - 1, x1 + 6 * unit);
        canvas.line(x0, y0, x1, y1, color, std::max(thick, 2));
    }
}

template <class A>
const auto& pick(Rng& rng, const A& options) {
    return options[rng.index(options.size())];
}

std::string join_shapes(const std::vector<DrawnShape>& shapes) {
    std::string out;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (i > 0) out += (i + 1 == shapes.size()) ? " and " : ", ";
        out += "a " + shapes[i].color + " " + shapes[i].kind;
    }
    return out;
}

SyntheticPair make_less_abstract(Rng& rng, int size) {
    // detailed scene, generic one-line text
    SyntheticPair sp;
    Canvas canvas(size);
    const int n = rng.range(6, 9);
    for (int i = 0; i < n; ++i) {
        const char* kind = pick(rng, kKinds);
        const Color& color = pick(rng, kPalette);
        draw_random(canvas, rng, kind, color, true);
        sp.drawn.push_back({kind, color.name, true});
    }
    static constexpr std::array<const char*, 4> kLead{"this figure shows", "the picture depicts", "here we see",
                                                      "the image contains"};
    static constexpr std::array<const char*, 4> kAdj{"colorful", "detailed", "busy", "complex"};
    static constexpr std::array<const char*, 4> kNoun{"scene", "picture", "composition", "illustration"};
    std::string text = std::string(pick(rng, kLead)) + " a " + pick(rng, kAdj) + " " + pick(rng, kNoun) + ".";
    sp.pair.image = to_preprocessed(canvas.image());
    sp.pair.text = clean_text(text);
    sp.pair.label = AbsLabel::ImageLessAbstract;
    return sp;
}

SyntheticPair make_more_abstract(Rng& rng, int size) {
    // sparse monochrome schematic, detailed text about attributes not drawn
    SyntheticPair sp;
    Canvas canvas(size);
    const int n = rng.range(2, 3);
    for (int i = 0; i < n; ++i) {
        const char* kind = pick(rng, kKinds);
        draw_random(canvas, rng, kind, kBlack, false);
        sp.drawn.push_back({kind, kBlack.name, false});
    }
    static constexpr std::array<const char*, 4> kSize{"small", "large", "tiny", "huge"};
    static constexpr std::array<const char*, 5> kWhere{"top", "bottom", "left", "right", "center"};
    static constexpr std::array<const char*, 5> kTexture{"striped", "dotted", "shiny", "rough", "smooth"};
    std::string text;
    const int sentences = rng.range(3, 5);
    for (int i = 0; i < sentences; ++i) {
        text += std::string("the ") + pick(rng, kSize) + " " + pick(rng, kPalette).name + " " + pick(rng, kKinds) +
                " is located at the " + pick(rng, kWhere) + " and its surface is " + pick(rng, kTexture) + ". ";
    }
    sp.pair.image = to_preprocessed(canvas.image());
    sp.pair.text = clean_text(text);
    sp.pair.label = AbsLabel::ImageMoreAbstract;
    return sp;
}

SyntheticPair make_equal(Rng& rng, int size) {
    // scene exactly enumerated by its text
    SyntheticPair sp;
    Canvas canvas(size);
    const int n = rng.range(2, 4);
    for (int i = 0; i < n; ++i) {
        const char* kind = pick(rng, kKinds);
        const Color& color = pick(rng, kPalette);
        draw_random(canvas, rng, kind, color, true);
        sp.drawn.push_back({kind, color.name, true});
    }
    std::string text = "the image shows " + join_shapes(sp.drawn) + ".";
    sp.pair.image = to_preprocessed(canvas.image());
    sp.pair.text = clean_text(text);
    sp.pair.label = AbsLabel::EqualAbstractness;
    return sp;
}

}  // namespace

std::vector<SyntheticPair> generate_synthetic_corpus(int n_per_class, std::uint64_t seed, int image_size) {
    if (n_per_class < 1) throw usage_error("InvalidArgument", "n_per_class must be >= 1");
    if (image_size < 8) throw usage_error("InvalidArgument", "image_size must be >= 8");
    std::vector<SyntheticPair> out;
    out.reserve(std::size_t(n_per_class) * 3);
    for (int i = 0; i < n_per_class; ++i) {
        for (int c = 0; c < kNumClasses; ++c) {
            const int index = i * kNumClasses + c;
            char id[32];
            std::snprintf(id, sizeof id, "syn-%06d", index);
            Rng rng(derive_seed(seed, id));
            SyntheticPair sp = c == 0 ? make_less_abstract(rng, image_size)
                               : c == 1 ? make_more_abstract(rng, image_size)
                                        : make_equal(rng, image_size);
            sp.pair.pair_id = id;
            sp.pair.source = "synthetic";
            out.push_back(std::move(sp));
        }
    }
    return out;
}

void split_dataset(std::vector<ImageTextPair>& pairs, int test_per_class, std::uint64_t seed) {
    if (test_per_class <= 0) throw usage_error("InvalidArgument", "test_per_class must be positive");
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].label) members[static_cast<int>(*pairs[i].label)].push_back(i);
    for (int c = 0; c < kNumClasses; ++c)
        if (static_cast<int>(members[c].size()) <= test_per_class)
            throw data_error("InsufficientClassMembers",
                             std::string(label_string(static_cast<AbsLabel>(c))) + " has " +
                                 std::to_string(members[c].size()) + " pairs, need more than " +
                                 std::to_string(test_per_class));
    for (int c = 0; c < kNumClasses; ++c) {
        Rng rng(derive_seed(seed, std::string("split/") + label_string(static_cast<AbsLabel>(c))));
        auto idx = members[c];
        rng.shuffle(idx);
        for (std::size_t k = 0; k < idx.size(); ++k)
            pairs[idx[k]].split = static_cast<int>(k) < test_per_class ? Split::Test : Split::Train;
    }
}

}  // namespace absnet
