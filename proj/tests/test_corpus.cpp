#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <set>

#include "absnet/corpus.hpp"
#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "support.hpp"

using namespace absnet;

namespace {

std::string error_code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

std::vector<ImageTextPair> plain(const std::vector<SyntheticPair>& v) {
    std::vector<ImageTextPair> out;
    for (const auto& s : v) out.push_back(s.pair);
    return out;
}

}  // namespace

TEST_CASE("synthetic corpus: balanced labels, stable ids, reproducible from the seed") {
    const auto a = generate_synthetic_corpus(5, 3, 32);
    const auto b = generate_synthetic_corpus(5, 3, 32);
    const auto c = generate_synthetic_corpus(5, 4, 32);
    REQUIRE(a.size() == 15);
    std::array<int, 3> per_class{};
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].pair.label);
        ++per_class[std::size_t(*a[i].pair.label)];
        CHECK(static_cast<int>(*a[i].pair.label) == static_cast<int>(i % 3));
        ids.insert(a[i].pair.pair_id);
        CHECK(a[i].pair.image == b[i].pair.image);
        CHECK(a[i].pair.text == b[i].pair.text);
        CHECK(a[i].pair.image.height == 32);
        CHECK(!a[i].pair.text.sentences.empty());
        CHECK(!a[i].drawn.empty());
    }
    CHECK(per_class == std::array<int, 3>{5, 5, 5});
    CHECK(ids.size() == 15);
    CHECK(a[0].pair.pair_id == "syn-000000");
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= !(a[i].pair.image == c[i].pair.image);
    CHECK(any_diff);
}

TEST_CASE("a pair's content does not depend on how many pairs are generated") {
    const auto small = generate_synthetic_corpus(2, 9, 24);
    const auto large = generate_synthetic_corpus(6, 9, 24);
    for (std::size_t i = 0; i < small.size(); ++i) {
        CHECK(small[i].pair.text == large[i].pair.text);
        CHECK(small[i].pair.image == large[i].pair.image);
    }
}

TEST_CASE("equal-abstractness text enumerates exactly the drawn shapes") {
    for (const auto& sp : generate_synthetic_corpus(20, 5, 24)) {
        if (*sp.pair.label != AbsLabel::EqualAbstractness) continue;
        std::multiset<std::string> mentioned, drawn;
        const auto& words = sp.pair.text.sentences.at(0);
        for (std::size_t k = 1; k < words.size(); ++k)
            if (words[k] == "rectangle" || words[k] == "circle" || words[k] == "line")
                mentioned.insert(words[k - 1] + " " + words[k]);
        for (const auto& d : sp.drawn) drawn.insert(d.color + " " + d.kind);
        CHECK(mentioned == drawn);
    }
}

TEST_CASE("split_dataset: exact test counts per class, disjoint, seeded") {
    auto pairs = plain(generate_synthetic_corpus(12, 1, 16));
    split_dataset(pairs, 4, 77);
    std::array<int, 3> test{}, train{};
    for (const auto& p : pairs) (p.split == Split::Test ? test : train)[std::size_t(*p.label)]++;
    CHECK(test == std::array<int, 3>{4, 4, 4});
    CHECK(train == std::array<int, 3>{8, 8, 8});

    auto again = plain(generate_synthetic_corpus(12, 1, 16));
    split_dataset(again, 4, 77);
    auto other = plain(generate_synthetic_corpus(12, 1, 16));
    split_dataset(other, 4, 78);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        same &= pairs[i].split == again[i].split;
        differs |= pairs[i].split != other[i].split;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("split_dataset rejects classes that cannot fill the test split") {
    auto pairs = plain(generate_synthetic_corpus(3, 1, 16));
    CHECK(error_code_of([&] { split_dataset(pairs, 3, 1); }) == "InsufficientClassMembers");
    CHECK(error_code_of([&] { split_dataset(pairs, 0, 1); }) == "InvalidArgument");
}

TEST_CASE("dataset directory round-trips pairs, labels, splits and pixels") {
    testing::TempDir dir("ds");
    auto pairs = plain(generate_synthetic_corpus(4, 2, 20));
    split_dataset(pairs, 1, 5);
    pairs[0].label.reset();
    pairs[0].split = Split::Unsplit;
    write_dataset(dir.path(), pairs, {{"generator", kSyntheticGeneratorVersion}});
    const Dataset ds = read_dataset(dir.path());
    REQUIRE(ds.pairs.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(ds.pairs[i].pair_id == pairs[i].pair_id);
        CHECK(ds.pairs[i].text == pairs[i].text);
        CHECK(ds.pairs[i].label == pairs[i].label);
        CHECK(ds.pairs[i].split == pairs[i].split);
        // 8-bit storage is exact for pixels that came from 8-bit sources
        CHECK(ds.pairs[i].image == pairs[i].image);
    }
    CHECK(ds.manifest["generator"] == kSyntheticGeneratorVersion);
    CHECK(ds.manifest["image_size"] == 20);
    CHECK(ds.with_split(Split::Test).size() == 3);
    CHECK(ds.with_split(Split::Unsplit).size() == 1);
}

TEST_CASE("missing and corrupt datasets are data errors") {
    testing::TempDir dir("ds");
    CHECK(error_code_of([&] { read_dataset(dir.path()); }) == "DatasetNotFound");
    write_file(dir / "pairs.jsonl", "{\"pair_id\": 3}\n");
    CHECK(error_code_of([&] { read_dataset(dir.path()); }) == "CorruptDataset");
}

TEST_CASE("image preprocessing: PNG round trip, [-1, 1] scaling, bilinear resize") {
    RgbImage img{2, 2, {0, 0, 0, 255, 255, 255, 255, 0, 0, 0, 0, 255}};
    const RgbImage back = decode_image(encode_png(img));
    CHECK(back.data == img.data);

    const auto pre = to_preprocessed(img);
    CHECK(pre.at(0, 0, 0) == -1.0f);
    CHECK(pre.at(0, 1, 0) == 1.0f);
    CHECK(to_rgb(pre).data == img.data);

    // half-pixel centres: 2 -> 4 keeps the corner values, blends inside
    const RgbImage grey{1, 2, {0, 0, 0, 200, 200, 200}};
    const RgbImage up = resize_bilinear(grey, 1, 4);
    CHECK(up.data[0] == 0);
    CHECK(up.data[3] == 50);
    CHECK(up.data[6] == 150);
    CHECK(up.data[9] == 200);

    CHECK(error_code_of([] { decode_image("GIF89a..."); }) == "UndecodableImage");
    CHECK(error_code_of([] { decode_image("\x89PNG\r\n\x1a\nbroken"); }) == "UndecodableImage");
}

TEST_CASE("labels and splits parse their own string forms") {
    for (int c = 0; c < kNumClasses; ++c) {
        const auto l = static_cast<AbsLabel>(c);
        CHECK(parse_label(label_string(l)) == l);
    }
    for (Split s : {Split::Train, Split::Test, Split::Unsplit}) CHECK(parse_split(split_string(s)) == s);
}
