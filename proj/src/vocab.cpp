#include "absnet/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "absnet/rng.hpp"

namespace absnet {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    counts_.resize(tokens_.size(), 0);
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token(int id) const {
    static const std::string unk = kUnkToken, pad = kPadToken;
    if (id == unk_id()) return unk;
    if (id == pad_id()) return pad;
    return tokens_.at(std::size_t(id));
}

Vocabulary build_vocab(const std::vector<const TokenizedText*>& corpus, int max_size) {
    if (max_size <= 0) throw usage_error("InvalidArgument", "max_size must be positive");
    std::unordered_map<std::string, std::uint64_t> freq;
    std::uint64_t total = 0;
    for (const auto* text : corpus)
        for (const auto& sentence : text->sentences)
            for (const auto& tok : sentence) {
                ++freq[tok];
                ++total;
            }
    if (total == 0) throw data_error("EmptyCorpus", "corpus contains no tokens");

    std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (static_cast<int>(ranked.size()) > max_size) ranked.resize(static_cast<std::size_t>(max_size));

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::uint64_t kept = 0;
    for (auto& [tok, n] : ranked) {
        tokens.push_back(tok);
        counts.push_back(n);
        kept += n;
    }
    Vocabulary v(std::move(tokens), std::move(counts));
    v.total_occurrences = total;
    v.distinct_tokens = freq.size();
    v.coverage = static_cast<double>(kept) / static_cast<double>(total);
    return v;
}

void save_vocab_tsv(const Vocabulary& v, const std::filesystem::path& path) {
    std::ostringstream out;
    for (int i = 0; i < v.regular_size(); ++i) out << i << '\t' << v.token(i) << '\t' << v.count(i) << '\n';
    write_file(path, out.str());
}

Vocabulary load_vocab_tsv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string rank, tok, count;
        if (!std::getline(ls, rank, '\t') || !std::getline(ls, tok, '\t') || !std::getline(ls, count))
            throw data_error("CorruptVocabulary", "bad line in " + path.string() + ": " + line);
        if (std::stoul(rank) != tokens.size())
            throw data_error("CorruptVocabulary", "ranks out of order in " + path.string());
        tokens.push_back(tok);
        counts.push_back(std::stoull(count));
    }
    return Vocabulary(std::move(tokens), std::move(counts));
}

TokenGrid encode_tokens(const TokenizedText& text, const Vocabulary& vocab, int rows, int cols) {
    TokenGrid g;
    g.rows = rows;
    g.cols = cols;
    g.ids.assign(std::size_t(rows) * cols, vocab.pad_id());
    g.mask.assign(std::size_t(rows) * cols, 0);
    const int nsent = std::min<int>(rows, static_cast<int>(text.sentences.size()));
    for (int r = 0; r < nsent; ++r) {
        const auto& s = text.sentences[std::size_t(r)];
        const int n = std::min<int>(cols, static_cast<int>(s.size()));
        for (int c = 0; c < n; ++c) {
            g.ids[std::size_t(r) * cols + c] = vocab.id(s[std::size_t(c)]);
            g.mask[std::size_t(r) * cols + c] = 1;
        }
    }
    return g;
}

TokenizedText decode_tokens(const TokenGrid& grid, const Vocabulary& vocab) {
    TokenizedText t;
    for (int r = 0; r < grid.rows; ++r) {
        std::vector<std::string> s;
        for (int c = 0; c < grid.cols; ++c)
            if (grid.real(r, c)) s.push_back(vocab.token(grid.at(r, c)));
        if (!s.empty()) t.sentences.push_back(std::move(s));
    }
    return t;
}

EmbeddingTable init_random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
    if (dim <= 0) throw usage_error("InvalidArgument", "embedding dimension must be positive");
    EmbeddingTable t;
    t.rows = vocab.size();
    t.dim = dim;
    t.values.assign(std::size_t(t.rows) * dim, 0.0f);
    Rng rng(seed);
    for (int r = 0; r < t.rows; ++r) {
        if (r == vocab.pad_id()) continue;
        for (int k = 0; k < dim; ++k) t.values[std::size_t(r) * dim + k] = static_cast<float>(rng.uniform(-0.1, 0.1));
    }
    return t;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               std::uint64_t seed) {
    EmbeddingTable t = init_random_embeddings(vocab, dim, seed);
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw data_error("MalformedVectorFile", "missing header in " + path.string());
    std::istringstream hs(line);
    long count = -1, file_dim = -1;
    if (!(hs >> count >> file_dim) || count < 0 || file_dim <= 0)
        throw data_error("MalformedVectorFile", "bad header '" + line + "'");
    if (file_dim != dim)
        throw data_error("DimensionMismatch",
                         "file dimension " + std::to_string(file_dim) + " but configured " + std::to_string(dim));
    long seen = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        std::vector<float> vec;
        std::string num;
        while (ls >> num) {
            try {
                std::size_t pos = 0;
                vec.push_back(std::stof(num, &pos));
                if (pos != num.size()) throw std::invalid_argument(num);
            } catch (const std::exception&) {
                throw data_error("MalformedVectorFile", "line " + std::to_string(lineno) + ": bad number '" + num + "'");
            }
        }
        if (static_cast<long>(vec.size()) != file_dim)
            throw data_error("MalformedVectorFile", "line " + std::to_string(lineno) + ": expected " +
                                                        std::to_string(file_dim) + " values, got " +
                                                        std::to_string(vec.size()));
        ++seen;
        if (vocab.contains(tok)) {
            const int id = vocab.id(tok);
            std::copy(vec.begin(), vec.end(), t.values.begin() + std::ptrdiff_t(id) * dim);
        }
    }
    if (seen != count)
        throw data_error("MalformedVectorFile",
                         "header declares " + std::to_string(count) + " vectors, found " + std::to_string(seen));
    return t;
}

}  // namespace absnet
