#include <algorithm>
#include <regex>
#include <set>

#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "absnet/corpus.hpp"
#include "absnet/errors.hpp"
#include "absnet/xml.hpp"

namespace absnet {

const char* label_string(AbsLabel l) {
    switch (l) {
        case AbsLabel::ImageLessAbstract: return "I<aT";
        case AbsLabel::ImageMoreAbstract: return "I>aT";
        case AbsLabel::EqualAbstractness: return "I=aT";
    }
    return "?";
}

AbsLabel parse_label(std::string_view s) {
    if (s == "I<aT") return AbsLabel::ImageLessAbstract;
    if (s == "I>aT") return AbsLabel::ImageMoreAbstract;
    if (s == "I=aT") return AbsLabel::EqualAbstractness;
    throw data_error("BadLabel", "unknown label '" + std::string(s) + "'");
}

const char* split_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unsplit: return "unsplit";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    if (s == "unsplit") return Split::Unsplit;
    throw data_error("BadSplit", "unknown split '" + std::string(s) + "'");
}

namespace {

std::string base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text)
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/') clean += c;
    // trailing bits of a partial group are padding
    const std::size_t bytes = clean.size() * 3 / 4;
    while (clean.size() % 4) clean += 'A';
    using It = boost::archive::iterators::transform_width<
        boost::archive::iterators::binary_from_base64<std::string::const_iterator>, 8, 6>;
    std::string out(It(clean.begin()), It(clean.end()));
    out.resize(std::min(out.size(), bytes));
    return out;
}

int ordinal_from_id(const std::string& id) {
    std::string digits;
    for (auto it = id.rbegin(); it != id.rend() && std::isdigit(static_cast<unsigned char>(*it)); ++it)
        digits.insert(digits.begin(), *it);
    return digits.empty() ? 0 : std::stoi(digits);
}

}  // namespace

std::vector<int> figure_mentions(std::string_view text) {
    static const std::regex head(R"(\b(?:figures?|figs?\.?)\s*(\d+)((?:\s*(?:,|&|and|to|-)\s*\d+)*))",
                                 std::regex::icase);
    static const std::regex tail(R"((,|&|and|to|-)\s*(\d+))", std::regex::icase);
    std::set<int> found;
    std::string s(text);
    for (std::sregex_iterator it(s.begin(), s.end(), head), end; it != end; ++it) {
        int prev = std::stoi((*it)[1].str());
        found.insert(prev);
        const std::string rest = (*it)[2].str();
        for (std::sregex_iterator jt(rest.begin(), rest.end(), tail); jt != end; ++jt) {
            int n = std::stoi((*jt)[2].str());
            std::string sep = (*jt)[1].str();
            std::transform(sep.begin(), sep.end(), sep.begin(), ::tolower);
            if ((sep == "-" || sep == "to") && n > prev && n - prev < 100)
                for (int k = prev + 1; k < n; ++k) found.insert(k);
            found.insert(n);
            prev = n;
        }
    }
    return {found.begin(), found.end()};
}

ArticleDocument parse_article(std::string_view xml_bytes, const ArticleSchema& schema) {
    const xml::Document dom = xml::parse(xml_bytes);
    if (dom.root.name != schema.article)
        throw data_error("MalformedXml", "root element is <" + dom.root.name + ">, expected <" + schema.article + ">");

    ArticleDocument doc;
    if (auto* id = dom.root.attribute(schema.article_id_attr)) doc.article_id = *id;
    if (auto* j = dom.root.attribute(schema.journal_attr)) doc.journal = *j;

    struct ParagraphRefs {
        std::set<std::string> xref_targets;
    };
    std::vector<ParagraphRefs> refs;
    std::set<std::string> seen_ids;
    int figure_position = 0;

    // Paragraphs and figures in document order; neither is searched for the other.
    auto walk = [&](auto&& self, const xml::Node& n) -> void {
        if (n.kind != xml::Node::Kind::Element) return;
        if (n.name == schema.paragraph) {
            Paragraph p;
            p.id = static_cast<int>(doc.paragraphs.size()) + 1;
            p.raw = std::string(dom.inner_source(n));
            ParagraphRefs r;
            n.visit([&](const xml::Node& d) {
                if (d.kind == xml::Node::Kind::Element && d.name == schema.xref)
                    if (auto* rid = d.attribute(schema.xref_target_attr)) r.xref_targets.insert(*rid);
            });
            doc.paragraphs.push_back(std::move(p));
            refs.push_back(std::move(r));
            return;
        }
        if (n.name == schema.figure) {
            ++figure_position;
            Figure f;
            if (auto* id = n.attribute(schema.figure_id_attr)) f.figure_id = *id;
            if (f.figure_id.empty()) f.figure_id = "fig" + std::to_string(figure_position);
            if (!seen_ids.insert(f.figure_id).second)
                throw data_error("MalformedXml", "duplicate figure id '" + f.figure_id + "'");
            if (auto* ord = n.attribute(schema.figure_ordinal_attr)) {
                try {
                    f.ordinal = std::stoi(*ord);
                } catch (const std::exception&) {
                    throw data_error("MalformedXml", "bad figure ordinal '" + *ord + "'");
                }
            } else {
                f.ordinal = ordinal_from_id(f.figure_id);
                if (f.ordinal == 0) f.ordinal = figure_position;
            }
            std::string payload;
            for (const auto& c : n.children) {
                if (c.kind != xml::Node::Kind::Element) continue;
                if (c.name == schema.caption) f.caption_raw = std::string(dom.inner_source(c));
                if (c.name == schema.graphic) payload = c.text_content();
            }
            f.image_bytes = base64_decode(payload);
            if (f.image_bytes.empty()) {
                doc.warnings.push_back({"MissingFigurePayload", doc.article_id + "/" + f.figure_id,
                                        "figure has no image data; skipped"});
                return;
            }
            doc.figures.push_back(std::move(f));
            return;
        }
        for (const auto& c : n.children) self(self, c);
    };
    walk(walk, dom.root);

    for (std::size_t pi = 0; pi < doc.paragraphs.size(); ++pi) {
        const auto& p = doc.paragraphs[pi];
        const auto mentioned = figure_mentions(strip_markup(p.raw));
        for (auto& f : doc.figures) {
            bool hit = std::binary_search(mentioned.begin(), mentioned.end(), f.ordinal) ||
                       refs[pi].xref_targets.count(f.figure_id) != 0;
            if (hit) f.referencing_paragraphs.push_back(p.id);
        }
    }
    return doc;
}

ExtractResult extract_pairs(const ArticleDocument& doc, int image_size) {
    ExtractResult out;
    auto concat = [](const TokenizedText& a, const TokenizedText& b) {
        TokenizedText t = a;
        for (const auto& s : b.sentences) t.sentences.push_back(s);
        if (static_cast<int>(t.sentences.size()) > kMaxSentences) t.sentences.resize(kMaxSentences);
        return t;
    };
    for (const auto& f : doc.figures) {
        PreprocessedImage img;
        try {
            img = preprocess_image(f.image_bytes, image_size);
        } catch (const Error& e) {
            out.warnings.push_back({"UndecodableImage", doc.article_id + "/" + f.figure_id, e.what()});
            continue;
        }
        const TokenizedText caption = clean_text(f.caption_raw);
        auto make = [&](std::string suffix, TokenizedText text) {
            ImageTextPair p;
            p.pair_id = doc.article_id + "/" + f.figure_id + "/" + suffix;
            p.image = img;
            p.text = std::move(text);
            p.source = doc.journal;
            out.pairs.push_back(std::move(p));
        };
        if (f.referencing_paragraphs.empty()) {
            make("caption", caption);
            continue;
        }
        for (int pid : f.referencing_paragraphs) {
            const auto& para = doc.paragraphs[static_cast<std::size_t>(pid - 1)];
            make("p" + std::to_string(pid), concat(caption, clean_text(para.raw)));
        }
    }
    return out;
}

}  // namespace absnet
