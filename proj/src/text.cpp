#include <algorithm>
#include <array>
#include <cctype>

#include "absnet/corpus.hpp"
#include "absnet/xml.hpp"

namespace absnet {

std::size_t TokenizedText::token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

namespace {

constexpr std::array<std::string_view, 7> kFormulaElements{
    "formula", "inline-formula", "disp-formula", "mml:math", "math", "tex-math", "inline-graphic"};

// Elements whose boundaries separate words.
constexpr std::array<std::string_view, 12> kBlockElements{
    "p", "br", "sec", "title", "caption", "label", "list", "list-item", "td", "th", "tr", "div"};

std::string_view tag_name(std::string_view tag) {
    // tag starts after '<' (and optional '/')
    std::size_t e = 0;
    while (e < tag.size() && !std::isspace(static_cast<unsigned char>(tag[e])) && tag[e] != '>' && tag[e] != '/')
        ++e;
    return tag.substr(0, e);
}

template <std::size_t N>
bool in_set(std::string_view name, const std::array<std::string_view, N>& set) {
    return std::find(set.begin(), set.end(), name) != set.end();
}

// Index just past the element that opens at `open` (which points at '<'),
// honouring nesting of the same element name. npos if unterminated.
std::size_t element_end(std::string_view s, std::size_t open, std::string_view name) {
    auto gt = s.find('>', open);
    if (gt == std::string_view::npos) return std::string_view::npos;
    if (gt > 0 && s[gt - 1] == '/') return gt + 1;  // self-closing
    int depth = 1;
    std::size_t i = gt + 1;
    while (i < s.size()) {
        auto lt = s.find('<', i);
        if (lt == std::string_view::npos) return std::string_view::npos;
        bool closing = lt + 1 < s.size() && s[lt + 1] == '/';
        auto nm = tag_name(s.substr(lt + (closing ? 2 : 1)));
        auto end = s.find('>', lt);
        if (end == std::string_view::npos) return std::string_view::npos;
        if (nm == name) {
            bool self_closing = s[end - 1] == '/';
            if (closing) --depth;
            else if (!self_closing) ++depth;
            if (depth == 0) return end + 1;
        }
        i = end + 1;
    }
    return std::string_view::npos;
}

const std::array<std::string_view, 22> kAbbreviations{
    "e.g", "i.e", "fig", "figs", "eq", "eqs", "al", "vs", "cf", "no", "nos", "ref", "refs",
    "dr", "mr", "mrs", "ms", "prof", "sec", "approx", "resp", "tab"};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::string strip_markup(std::string_view raw) {
    std::string untagged;
    untagged.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        char c = raw[i];
        if (c != '<') {
            untagged += c;
            ++i;
            continue;
        }
        auto gt = raw.find('>', i);
        if (gt == std::string_view::npos) {
            // dangling '<' is not markup
            untagged += ' ';
            ++i;
            continue;
        }
        bool closing = i + 1 < raw.size() && raw[i + 1] == '/';
        auto name = tag_name(raw.substr(i + (closing ? 2 : 1)));
        if (!closing && in_set(name, kFormulaElements)) {
            auto end = element_end(raw, i, name);
            untagged += " formula ";
            i = end == std::string_view::npos ? raw.size() : end;
            continue;
        }
        if (in_set(name, kBlockElements)) untagged += ' ';
        i = gt + 1;
    }
    std::string decoded = xml::decode_entities(untagged);
    std::string out;
    out.reserve(decoded.size());
    for (char ch : decoded) {
        auto u = static_cast<unsigned char>(ch);
        if (u == '\t' || u == '\n' || u == '\r') out += ' ';
        else if (u < 0x20 || u == 0x7F) continue;
        else out += ch;
    }
    return out;
}

TokenizedText clean_text(std::string_view raw, int max_sentences, int max_tokens) {
    const std::string text = strip_markup(raw);
    TokenizedText result;

    std::vector<std::string> tokens;
    std::string tok;
    auto end_token = [&] {
        if (!tok.empty()) {
            tokens.push_back(std::move(tok));
            tok.clear();
        }
    };
    auto end_sentence = [&] {
        end_token();
        if (!tokens.empty()) {
            if (static_cast<int>(tokens.size()) > max_tokens) tokens.resize(static_cast<std::size_t>(max_tokens));
            result.sentences.push_back(std::move(tokens));
            tokens.clear();
        }
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        auto u = static_cast<unsigned char>(text[i]);
        if (is_word_byte(u)) {
            tok += static_cast<char>(std::tolower(u));
            continue;
        }
        end_token();
        if (u != '.' && u != '!' && u != '?') continue;
        bool followed_by_space = i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (!followed_by_space) continue;
        if (u == '.') {
            // the run of non-space characters ending at this period
            std::size_t b = i;
            while (b > 0 && !std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
            std::string word;
            for (std::size_t k = b; k < i; ++k) word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[k])));
            while (!word.empty() && (word.front() == '(' || word.front() == '[' || word.front() == '"'))
                word.erase(word.begin());
            if (in_set(std::string_view(word), kAbbreviations)) continue;
        }
        end_sentence();
    }
    end_sentence();

    if (static_cast<int>(result.sentences.size()) > max_sentences)
        result.sentences.resize(static_cast<std::size_t>(max_sentences));
    return result;
}

}  // namespace absnet
