#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "absnet/config.hpp"
#include "absnet/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("absnet-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

// 12-pixel images, 4 x 5 token grids, widths of a handful of units.
inline absnet::RunConfig tiny_config() {
    absnet::RunConfig c = absnet::RunConfig::defaults(absnet::Profile::Desk);
    for (auto [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"image_size", "12"}, {"cnn_channels", "4,8"}, {"d_img", "8"}, {"gru_hidden", "4"}, {"d_txt", "8"},
             {"attn_size", "5"}, {"word_dim", "6"}, {"max_sentences", "4"}, {"max_words", "5"},
             {"seed_side", "3"}, {"seed_channels", "4"}, {"dec_channels", "4,4,3"}, {"upsample", "2,2"},
             {"sent_hidden", "6"}, {"word_hidden", "6"}, {"classifier_hidden", "10"}})
        c.set(k, v);
    c.validate();
    return c;
}

inline std::filesystem::path fixture_dir() { return ABSNET_FIXTURE_DIR; }

// Random markup-ish text drawn from words, punctuation, tags and entities.
inline std::string fuzz_text(absnet::Rng& rng, std::size_t pieces) {
    static const std::vector<std::string> atoms{
        "alpha", "Beta", "x", "42", "e.g.", "Fig.", "al.", " ", " ", " ", ". ", "! ", "? ", ".", ",", ";",
        "<p>", "</p>", "<italic>", "</italic>", "<br/>", "<inline-formula>a+b</inline-formula>", "&amp;", "&lt;",
        "&#233;", "&bogus;", "\t", "\n", "\x01", "<", ">", "\xc3\xa9t\xc3\xa9", "(", ")", "\"", "-", "/"};
    std::string s;
    for (std::size_t i = 0; i < pieces; ++i) s += atoms[rng.index(atoms.size())];
    return s;
}

template <class T>
std::vector<T> random_vector(absnet::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return v;
}

template <class T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

}  // namespace testing
