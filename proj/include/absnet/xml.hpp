#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace absnet::xml {

// Minimal DOM for well-formed article XML: elements, attributes, character
// data (entities decoded, CDATA kept verbatim). Comments, processing
// instructions and DOCTYPE are skipped.
struct Node {
    enum class Kind { Element, Text };

    Kind kind = Kind::Element;
    std::string name;  // element name; empty for text
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Node> children;
    std::string text;  // decoded character data for text nodes

    // Byte range of the element's content in the source (between the start
    // and end tags). Empty for self-closing elements.
    std::size_t inner_begin = 0;
    std::size_t inner_end = 0;

    const std::string* attribute(std::string_view key) const;
    // Concatenated descendant character data.
    std::string text_content() const;

    template <class F>
    void visit(F&& f) const {
        f(*this);
        for (const auto& c : children) c.visit(f);
    }
};

struct Document {
    std::string source;
    Node root;

    std::string_view inner_source(const Node& n) const {
        return std::string_view(source).substr(n.inner_begin, n.inner_end - n.inner_begin);
    }
};

// Throws absnet::Error with code MalformedXml.
Document parse(std::string_view bytes);

// &amp; &lt; &gt; &quot; &apos; &nbsp; and numeric references. Unknown or
// malformed references are kept literally.
std::string decode_entities(std::string_view s);

}  // namespace absnet::xml
