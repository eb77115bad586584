#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "absnet/corpus.hpp"

namespace absnet {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kPadToken = "<pad>";

// Frequency-ranked vocabulary. Ids 0..K-1 are corpus tokens by rank; the
// specials follow: <unk> = K, <pad> = K+1.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

    int size() const { return static_cast<int>(tokens_.size()) + 2; }  // with specials
    int regular_size() const { return static_cast<int>(tokens_.size()); }
    int unk_id() const { return regular_size(); }
    int pad_id() const { return regular_size() + 1; }

    // <unk> for unknown tokens.
    int id(const std::string& token) const;
    bool contains(const std::string& token) const { return index_.count(token) != 0; }
    const std::string& token(int id) const;
    std::uint64_t count(int id) const { return id < regular_size() ? counts_[std::size_t(id)] : 0; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    // Fraction of corpus token occurrences mapped to non-<unk> ids.
    double coverage = 0.0;
    std::uint64_t total_occurrences = 0;
    std::uint64_t distinct_tokens = 0;

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, int> index_;
};

// Ties at equal frequency are broken lexicographically. Throws EmptyCorpus.
Vocabulary build_vocab(const std::vector<const TokenizedText*>& corpus, int max_size = 25000);

// vocab.tsv: rank<TAB>token<TAB>count per line (regular tokens only).
void save_vocab_tsv(const Vocabulary& v, const std::filesystem::path& path);
Vocabulary load_vocab_tsv(const std::filesystem::path& path);

// Fixed-size id grid, row = sentence, column = word position.
struct TokenGrid {
    int rows = 0;
    int cols = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;  // 1 = real token

    int at(int r, int c) const { return ids[std::size_t(r) * cols + c]; }
    bool real(int r, int c) const { return mask[std::size_t(r) * cols + c] != 0; }
};

TokenGrid encode_tokens(const TokenizedText& text, const Vocabulary& vocab, int rows = kMaxSentences,
                        int cols = kMaxSentenceTokens);

// Inverse of encode_tokens on real positions.
TokenizedText decode_tokens(const TokenGrid& grid, const Vocabulary& vocab);

// One row per vocabulary id (specials included); the <pad> row is zero.
struct EmbeddingTable {
    int rows = 0;
    int dim = 0;
    std::vector<float> values;

    std::span<const float> row(int id) const { return {values.data() + std::size_t(id) * dim, std::size_t(dim)}; }
};

EmbeddingTable init_random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed);

// Text word-vector file: "<count> <dim>" header, then "token v1 ... vdim".
// Rows for tokens absent from the file (and <unk>) are seeded uniform
// [-0.1, 0.1]. Throws MalformedVectorFile / DimensionMismatch.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               std::uint64_t seed);

}  // namespace absnet
