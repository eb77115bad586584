#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's implementation of the quantity being checked.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absnet/corpus.hpp"
#include "absnet/rng.hpp"

namespace oracles {

// Zipf-like corpus over a random alphabet; roughly `tokens` tokens.
inline std::vector<absnet::TokenizedText> random_corpus(absnet::Rng& rng, std::size_t tokens) {
    const std::size_t types = 5 + rng.index(400);
    std::vector<std::string> lexicon;
    for (std::size_t i = 0; i < types; ++i) {
        std::string w;
        const std::size_t len = 1 + rng.index(4);
        for (std::size_t k = 0; k < len; ++k) w += static_cast<char>('a' + rng.index(6));
        lexicon.push_back(w);  // duplicates are fine: they merge counts
    }
    std::vector<absnet::TokenizedText> corpus;
    std::size_t emitted = 0;
    while (emitted < tokens) {
        absnet::TokenizedText t;
        const std::size_t sentences = 1 + rng.index(5);
        for (std::size_t s = 0; s < sentences && emitted < tokens; ++s) {
            std::vector<std::string> sent;
            const std::size_t len = 1 + rng.index(20);
            for (std::size_t k = 0; k < len; ++k) {
                // squared uniform skews towards low ranks
                const double u = rng.uniform();
                sent.push_back(lexicon[std::min(types - 1, static_cast<std::size_t>(u * u * double(types)))]);
            }
            emitted += sent.size();
            t.sentences.push_back(std::move(sent));
        }
        corpus.push_back(std::move(t));
    }
    return corpus;
}

struct VocabOracle {
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    std::uint64_t kept = 0;
};

// Quadratic rank computation: a token's rank is the number of tokens that
// beat it (higher count, or equal count and lexicographically smaller).
inline VocabOracle brute_force_vocab(const std::vector<absnet::TokenizedText>& corpus, int max_size) {
    std::map<std::string, std::uint64_t> freq;
    VocabOracle out;
    for (const auto& t : corpus)
        for (const auto& s : t.sentences)
            for (const auto& w : s) {
                ++freq[w];
                ++out.total;
            }
    std::vector<std::pair<std::string, std::uint64_t>> all(freq.begin(), freq.end());
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (rank, index)
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::size_t rank = 0;
        for (std::size_t j = 0; j < all.size(); ++j)
            if (all[j].second > all[i].second || (all[j].second == all[i].second && all[j].first < all[i].first))
                ++rank;
        if (rank < static_cast<std::size_t>(max_size)) ranked.emplace_back(rank, i);
    }
    std::sort(ranked.begin(), ranked.end());
    for (auto [rank, i] : ranked) {
        out.tokens.push_back(all[i].first);
        out.counts.push_back(all[i].second);
        out.kept += all[i].second;
    }
    return out;
}

// 100 * num / den rendered with two decimals, rounding half up, by long
// division on the decimal digits.
inline std::string percent_string(long num, long den) {
    if (den == 0) return "undefined";
    long scaled = num * 100;
    long whole = scaled / den;
    long rem = scaled % den;
    std::string frac;
    for (int d = 0; d < 2; ++d) {
        rem *= 10;
        frac += static_cast<char>('0' + rem / den);
        rem %= den;
    }
    // round on the third digit
    const long third = rem * 10 / den;
    if (third >= 5) {
        int carry = 1;
        for (int k = 1; k >= 0 && carry; --k) {
            int digit = frac[std::size_t(k)] - '0' + carry;
            carry = digit / 10;
            frac[std::size_t(k)] = static_cast<char>('0' + digit % 10);
        }
        whole += carry;
    }
    return std::to_string(whole) + "." + frac;
}

}  // namespace oracles
