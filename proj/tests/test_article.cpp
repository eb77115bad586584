#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "absnet/corpus.hpp"
#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "support.hpp"

using namespace absnet;
using Sentences = std::vector<std::vector<std::string>>;

namespace {

ArticleDocument load(const std::string& name) { return parse_article(read_file(testing::fixture_dir() / name)); }

std::vector<std::string> ids(const ExtractResult& r) {
    std::vector<std::string> out;
    for (const auto& p : r.pairs) out.push_back(p.pair_id);
    return out;
}

}  // namespace

TEST_CASE("fixture A: explicit mention, cross-reference, and an unreferenced figure") {
    const auto doc = load("article_a.xml");
    CHECK(doc.article_id == "A");
    CHECK(doc.journal == "Journal of Fixtures");
    CHECK(doc.paragraphs.size() == 3);  // the caption paragraph of fig2 is not body text
    REQUIRE(doc.figures.size() == 2);
    CHECK(doc.figures[0].referencing_paragraphs == std::vector<int>{1, 3});
    CHECK(doc.figures[1].referencing_paragraphs.empty());
    CHECK(doc.warnings.empty());

    const auto r = extract_pairs(doc, 24);
    CHECK(ids(r) == std::vector<std::string>{"A/fig1/p1", "A/fig1/p3", "A/fig2/caption"});
    CHECK(r.pairs[2].text.sentences == Sentences{{"a", "blue", "square"}});
    for (const auto& p : r.pairs) {
        CHECK(p.image.height == 24);
        CHECK(p.image.width == 24);
        CHECK(p.source == "Journal of Fixtures");
        CHECK(!p.label.has_value());
    }
}

TEST_CASE("golden pair: caption sentences precede paragraph sentences token by token") {
    const auto r = extract_pairs(load("article_a.xml"), 24);
    REQUIRE(!r.pairs.empty());
    const Sentences want{
        // caption: label and title are separate blocks; "e.g." does not end a sentence
        {"figure", "1", "overview", "of", "the", "pipeline"},
        {"the", "input", "output", "images", "are", "shown", "e", "g", "in", "panel", "a"},
        // paragraph 1: the inline formula becomes one token
        {"as", "shown", "in", "figure", "1", "the", "model", "reads", "formula", "values"},
        {"it", "is", "fast"},
    };
    CHECK(r.pairs[0].pair_id == "A/fig1/p1");
    CHECK(r.pairs[0].text.sentences == want);
    // caption of the same figure with paragraph 3
    CHECK(r.pairs[1].text.sentences.back() ==
          std::vector<std::string>{"the", "encoder", "left", "panel", "is", "shallow"});
}

TEST_CASE("golden pair pixels: the circle centre is red and the corner is white") {
    const auto r = extract_pairs(load("article_a.xml"), 24);
    const auto& img = r.pairs[0].image;
    // 16x12 source, red ellipse centred; white corners. [-1, 1] scaling.
    CHECK(img.at(12, 12, 0) > 0.5f);
    CHECK(img.at(12, 12, 1) < -0.5f);
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0f));
    CHECK(img.at(0, 0, 2) == doctest::Approx(1.0f));
}

TEST_CASE("fixture B: figure lists and ranges fan out to five pairs") {
    const auto doc = load("article_b.xml");
    REQUIRE(doc.figures.size() == 3);
    CHECK(doc.figures[0].referencing_paragraphs == std::vector<int>{1, 2});
    CHECK(doc.figures[1].referencing_paragraphs == std::vector<int>{1, 2});
    CHECK(doc.figures[2].referencing_paragraphs == std::vector<int>{2});
    const auto r = extract_pairs(doc, 24);
    CHECK(ids(r) == std::vector<std::string>{"B/f-a/p1", "B/f-a/p2", "B/f-b/p1", "B/f-b/p2", "B/f-c/p2"});
    CHECK(r.pairs.back().text.sentences ==
          Sentences{{"error", "curve"}, {"across", "figures", "1", "3", "the", "error", "shrinks", "5"}});
}

TEST_CASE("fixture C: a figure without payload is skipped with a warning") {
    const auto doc = load("article_c.xml");
    REQUIRE(doc.warnings.size() == 1);
    CHECK(doc.warnings[0].code == "MissingFigurePayload");
    CHECK(doc.warnings[0].where == "C/fig1");
    REQUIRE(doc.figures.size() == 2);
    const auto r = extract_pairs(doc, 24);
    CHECK(ids(r) == std::vector<std::string>{"C/fig2/p2", "C/fig2/p3", "C/fig3/caption"});
    // JPEG payload decodes: orange rectangle in the middle
    const auto& img = r.pairs[2].image;
    CHECK(img.at(12, 12, 0) > 0.7f);
    CHECK(img.at(12, 12, 2) < -0.6f);
}

TEST_CASE("hand-counted pair totals across the three fixtures") {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const char* name : {"article_a.xml", "article_b.xml", "article_c.xml"}) {
        const auto r = extract_pairs(load(name), 24);
        counts[name] = r.pairs.size();
        total += r.pairs.size();
    }
    CHECK(counts["article_a.xml"] == 3);
    CHECK(counts["article_b.xml"] == 5);
    CHECK(counts["article_c.xml"] == 3);
    CHECK(total == 11);
}

TEST_CASE("schema element names are configurable") {
    ArticleSchema schema;
    schema.article = "doc";
    schema.paragraph = "para";
    const auto doc = parse_article(
        "<doc id=\"Z\"><para>Figure 1 here.</para><fig id=\"fig1\"><caption>c.</caption>"
        "<graphic>not base64 image data</graphic></fig></doc>",
        schema);
    CHECK(doc.paragraphs.size() == 1);
    REQUIRE(doc.figures.size() == 1);
    // undecodable bytes surface at extraction time
    const auto r = extract_pairs(doc, 8);
    CHECK(r.pairs.empty());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].code == "UndecodableImage");
}

TEST_CASE("wrong root and duplicate figure ids are malformed") {
    auto code = [](const std::string& xml) {
        try {
            parse_article(xml);
        } catch (const Error& e) {
            return e.code();
        }
        return std::string();
    };
    CHECK(code("<book/>") == "MalformedXml");
    CHECK(code("<article><fig id=\"f\"/><fig id=\"f\"/></article>") == "MalformedXml");
    CHECK(code("<article><fig id=\"f\" ordinal=\"x\"/></article>") == "MalformedXml");
}
