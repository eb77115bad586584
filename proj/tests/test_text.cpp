#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "absnet/corpus.hpp"
#include "absnet/errors.hpp"
#include "absnet/xml.hpp"
#include "support.hpp"

using namespace absnet;
using Sentences = std::vector<std::vector<std::string>>;

namespace {

std::string error_code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("xml parser builds elements, attributes and decoded text") {
    const auto doc = xml::parse(
        "<?xml version=\"1.0\"?><!DOCTYPE a><!-- c --><a k=\"v &amp; w\" j='q'>x &lt; y<b/>"
        "<![CDATA[<raw>&amp;]]><c>&#65;&#x42;</c></a>");
    CHECK(doc.root.name == "a");
    REQUIRE(doc.root.attribute("k"));
    CHECK(*doc.root.attribute("k") == "v & w");
    CHECK(*doc.root.attribute("j") == "q");
    CHECK(doc.root.attribute("missing") == nullptr);
    CHECK(doc.root.text_content() == "x < y<raw>&amp;AB");
    CHECK(doc.inner_source(doc.root.children.back()) == "&#65;&#x42;");
}

TEST_CASE("malformed xml is rejected") {
    for (const char* bad : {"", "<a>", "<a></b>", "<a><b></a></b>", "text only", "<a x=1></a>", "<a></a><b></b>",
                            "<a x=\"1\" x=\"2\"/>", "<a><!-- unterminated </a>"}) {
        CAPTURE(bad);
        CHECK(error_code_of([&] { xml::parse(bad); }) == "MalformedXml");
    }
}

TEST_CASE("entity decoding keeps unknown references literally") {
    CHECK(xml::decode_entities("a&amp;b&lt;&gt;&quot;&apos;") == "a&b<>\"'");
    CHECK(xml::decode_entities("&#233;") == "\xc3\xa9");
    CHECK(xml::decode_entities("a&nbsp;b") == "a b");
    CHECK(xml::decode_entities("&unknown; & &#xZZ;") == "&unknown; & &#xZZ;");
}

TEST_CASE("clean_text strips markup, replaces formulas and splits sentences") {
    const auto t = clean_text(
        "<p>The <italic>Cat</italic> sat (see Fig. 2, Smith et al. 2010). "
        "Value <inline-formula><mml:math>x<mml:mi>2</mml:mi></mml:math></inline-formula> rose! Why?</p>");
    const Sentences want{
        {"the", "cat", "sat", "see", "fig", "2", "smith", "et", "al", "2010"},
        {"value", "formula", "rose"},
        {"why"},
    };
    CHECK(t.sentences == want);
    CHECK(t.token_count() == 14);
}

TEST_CASE("decimal points and abbreviations do not end sentences") {
    CHECK(clean_text("Pi is 3.14 approx. here. Next").sentences ==
          Sentences{{"pi", "is", "3", "14", "approx", "here"}, {"next"}});
    CHECK(clean_text("See [e.g. this]. Done.").sentences == Sentences{{"see", "e", "g", "this"}, {"done"}});
}

TEST_CASE("control characters are dropped and entities decoded before tokenising") {
    CHECK(clean_text("a\x01" "b c&amp;d\te").sentences == Sentences{{"ab", "c", "d", "e"}});
}

TEST_CASE("caps truncate sentences and tokens") {
    std::string long_sentence;
    for (int i = 0; i < 80; ++i) long_sentence += "w" + std::to_string(i) + " ";
    const auto t = clean_text(long_sentence);
    REQUIRE(t.sentences.size() == 1);
    CHECK(t.sentences[0].size() == 50);
    CHECK(t.sentences[0].back() == "w49");

    std::string many;
    for (int i = 0; i < 45; ++i) many += "s" + std::to_string(i) + ". ";
    const auto m = clean_text(many);
    CHECK(m.sentences.size() == 30);
    CHECK(m.sentences.back() == std::vector<std::string>{"s29"});

    CHECK(clean_text(many, 3, 1).sentences.size() == 3);
}

TEST_CASE("property: cleaned fuzz respects the caps and yields no empty or markup tokens") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const std::string raw = testing::fuzz_text(rng, 1 + rng.index(400));
        const int max_s = 1 + static_cast<int>(rng.index(40));
        const int max_t = 1 + static_cast<int>(rng.index(60));
        const auto t = clean_text(raw, max_s, max_t);
        CHECK(static_cast<int>(t.sentences.size()) <= max_s);
        for (const auto& s : t.sentences) {
            CHECK(!s.empty());
            CHECK(static_cast<int>(s.size()) <= max_t);
            for (const auto& tok : s) {
                CHECK(!tok.empty());
                CHECK(tok.find_first_of("<>&; \t\n.") == std::string::npos);
            }
        }
        // cleaning is idempotent on the joined output
        std::string joined;
        for (const auto& s : t.sentences) {
            for (const auto& tok : s) joined += tok + " ";
            joined += ". ";
        }
        CHECK(clean_text(joined, max_s, max_t) == t);
    }
}

TEST_CASE("figure mentions cover lists, ranges and abbreviations") {
    CHECK(figure_mentions("see Figure 3") == std::vector<int>{3});
    CHECK(figure_mentions("Figs. 1 and 4") == std::vector<int>{1, 4});
    CHECK(figure_mentions("figures 2-5") == std::vector<int>{2, 3, 4, 5});
    CHECK(figure_mentions("Fig 7, 9 & 11") == std::vector<int>{7, 9, 11});
    CHECK(figure_mentions("Figure 1 to 3; fig.6") == std::vector<int>{1, 2, 3, 6});
    CHECK(figure_mentions("configure 5 things; Table 2").empty());
}
