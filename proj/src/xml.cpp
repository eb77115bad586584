#include "absnet/xml.hpp"

#include <cctype>
#include <cstdint>

#include "absnet/errors.hpp"

namespace absnet::xml {

const std::string* Node::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
        if (k == key) return &v;
    return nullptr;
}

std::string Node::text_content() const {
    if (kind == Kind::Text) return text;
    std::string out;
    for (const auto& c : children) out += c.text_content();
    return out;
}

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x110000) {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
           (static_cast<unsigned char>(c) & 0x80);
}
bool is_name_char(char c) {
    return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
}

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    Node parse_document() {
        if (s_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
        skip_misc();
        if (eof() || peek() != '<') fail("expected root element");
        Node root = parse_element();
        skip_misc();
        if (!eof()) fail("content after root element");
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw data_error("MalformedXml", msg + " at byte " + std::to_string(pos_));
    }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }
    bool starts(std::string_view t) const { return s_.substr(pos_, t.size()) == t; }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    }

    void skip_until(std::string_view terminator) {
        auto at = s_.find(terminator, pos_);
        if (at == std::string_view::npos) {
            pos_ = s_.size();
            fail("unterminated construct, expected '" + std::string(terminator) + "'");
        }
        pos_ = at + terminator.size();
    }

    void skip_doctype() {
        int depth = 0;
        while (!eof()) {
            char c = s_[pos_++];
            if (c == '[') ++depth;
            else if (c == ']') --depth;
            else if (c == '>' && depth <= 0) return;
        }
        fail("unterminated DOCTYPE");
    }

    // Whitespace, comments, PIs and DOCTYPE outside the root element.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts("<?")) skip_until("?>");
            else if (starts("<!--")) skip_until("-->");
            else if (starts("<!DOCTYPE")) skip_doctype();
            else return;
        }
    }

    std::string parse_name() {
        if (eof() || !is_name_start(peek())) fail("expected name");
        std::size_t b = pos_;
        while (!eof() && is_name_char(peek())) ++pos_;
        return std::string(s_.substr(b, pos_ - b));
    }

    Node parse_element() {
        ++pos_;  // '<'
        Node n;
        n.kind = Node::Kind::Element;
        n.name = parse_name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag <" + n.name + ">");
            if (starts("/>")) {
                pos_ += 2;
                n.inner_begin = n.inner_end = pos_;
                return n;
            }
            if (peek() == '>') {
                ++pos_;
                break;
            }
            std::string key = parse_name();
            skip_ws();
            if (eof() || peek() != '=') fail("expected '=' after attribute " + key);
            ++pos_;
            skip_ws();
            if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
            char q = s_[pos_++];
            auto end = s_.find(q, pos_);
            if (end == std::string_view::npos) fail("unterminated attribute value");
            auto raw = s_.substr(pos_, end - pos_);
            if (raw.find('<') != std::string_view::npos) fail("'<' in attribute value");
            for (const auto& [k, v] : n.attributes)
                if (k == key) fail("duplicate attribute " + key);
            n.attributes.emplace_back(std::move(key), decode_entities(raw));
            pos_ = end + 1;
        }

        n.inner_begin = pos_;
        std::string text;
        auto flush_text = [&] {
            if (!text.empty()) {
                Node t;
                t.kind = Node::Kind::Text;
                t.text = std::move(text);
                n.children.push_back(std::move(t));
                text.clear();
            }
        };
        for (;;) {
            if (eof()) fail("unexpected end of input inside <" + n.name + ">");
            if (peek() != '<') {
                auto next = s_.find('<', pos_);
                if (next == std::string_view::npos) next = s_.size();
                text += decode_entities(s_.substr(pos_, next - pos_));
                pos_ = next;
                continue;
            }
            if (starts("</")) {
                n.inner_end = pos_;
                pos_ += 2;
                std::string closing = parse_name();
                if (closing != n.name) fail("mismatched closing tag </" + closing + "> for <" + n.name + ">");
                skip_ws();
                if (eof() || peek() != '>') fail("unterminated end tag");
                ++pos_;
                flush_text();
                return n;
            }
            if (starts("<!--")) {
                skip_until("-->");
            } else if (starts("<![CDATA[")) {
                pos_ += 9;
                auto end = s_.find("]]>", pos_);
                if (end == std::string_view::npos) fail("unterminated CDATA");
                text += s_.substr(pos_, end - pos_);
                pos_ = end + 3;
            } else if (starts("<?")) {
                skip_until("?>");
            } else {
                flush_text();
                n.children.push_back(parse_element());
            }
        }
    }
};

}  // namespace

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 12) {
            out += s[i++];
            continue;
        }
        auto ent = s.substr(i + 1, semi - i - 1);
        bool ok = true;
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (ent == "nbsp") out += ' ';
        else if (ent.size() > 1 && ent[0] == '#') {
            std::uint32_t cp = 0;
            bool hex = ent[1] == 'x' || ent[1] == 'X';
            auto digits = ent.substr(hex ? 2 : 1);
            if (digits.empty()) ok = false;
            for (char c : digits) {
                int d;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
                else { ok = false; break; }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
                if (cp > 0x10FFFF) { ok = false; break; }
            }
            if (ok) append_utf8(out, cp);
        } else {
            ok = false;
        }
        if (ok) {
            i = semi + 1;
        } else {
            out += s[i++];
        }
    }
    return out;
}

Document parse(std::string_view bytes) {
    Document doc;
    doc.source = std::string(bytes);
    Parser p(doc.source);
    doc.root = p.parse_document();
    return doc;
}

}  // namespace absnet::xml
