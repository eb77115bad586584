#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace absnet {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

// Class order is fixed everywhere: probabilities, confusion rows/columns,
// argmax tie-breaking.
enum class AbsLabel : int {
    ImageLessAbstract = 0,  // I<aT
    ImageMoreAbstract = 1,  // I>aT
    EqualAbstractness = 2,  // I=aT
};

inline constexpr int kNumClasses = 3;

const char* label_string(AbsLabel l);
AbsLabel parse_label(std::string_view s);

enum class Split { Train, Test, Unsplit };
const char* split_string(Split s);
Split parse_split(std::string_view s);

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

inline constexpr int kMaxSentences = 30;
inline constexpr int kMaxSentenceTokens = 50;

struct TokenizedText {
    std::vector<std::vector<std::string>> sentences;

    std::size_t token_count() const;
    bool operator==(const TokenizedText&) const = default;
};

// Strip markup, replace formula elements by the token `formula`, decode
// entities, drop control characters, split into sentences and lowercase
// tokens, then truncate to the sentence/token caps.
TokenizedText clean_text(std::string_view raw, int max_sentences = kMaxSentences,
                         int max_tokens = kMaxSentenceTokens);

// Markup-free text: tags removed, formulas replaced, entities decoded.
std::string strip_markup(std::string_view raw);

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

// H x W x 3, row-major, values in [-1, 1].
struct PreprocessedImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    float at(int y, int x, int c) const { return pixels[(std::size_t(y) * width + x) * 3 + c]; }
    bool operator==(const PreprocessedImage&) const = default;
};

// 8-bit RGB raster.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // H x W x 3
};

// PNG or JPEG, sniffed from the magic bytes. Throws UndecodableImage.
RgbImage decode_image(std::string_view bytes);
std::string encode_png(const RgbImage& img);

// Bilinear resize with half-pixel centres.
RgbImage resize_bilinear(const RgbImage& img, int out_h, int out_w);

PreprocessedImage to_preprocessed(const RgbImage& img);
// Inverse map back to 8 bits, rounding to nearest.
RgbImage to_rgb(const PreprocessedImage& img);
RgbImage to_rgb(std::span<const float> hwc, int height, int width);

PreprocessedImage preprocess_image(std::string_view image_bytes, int size = 300);

// ---------------------------------------------------------------------------
// Articles and pairs
// ---------------------------------------------------------------------------

struct Paragraph {
    int id = 0;          // 1-based position in the article body
    std::string raw;     // inner markup of the paragraph element
};

struct Figure {
    std::string figure_id;
    int ordinal = 0;                  // 1-based number used in textual mentions
    std::string image_bytes;
    std::string caption_raw;
    std::vector<int> referencing_paragraphs;  // ascending paragraph ids
};

struct Warning {
    std::string code;  // e.g. MissingFigurePayload
    std::string where;
    std::string message;
};

struct ArticleDocument {
    std::string article_id;
    std::string journal;
    std::vector<Paragraph> paragraphs;
    std::vector<Figure> figures;
    std::vector<Warning> warnings;
};

// Element and attribute names of the accepted article schema.
struct ArticleSchema {
    std::string article = "article";
    std::string article_id_attr = "id";
    std::string journal_attr = "journal";
    std::string paragraph = "p";
    std::string figure = "fig";
    std::string figure_id_attr = "id";
    std::string figure_ordinal_attr = "ordinal";
    std::string caption = "caption";
    std::string graphic = "graphic";
    std::string xref = "xref";
    std::string xref_target_attr = "rid";
};

// Throws MalformedXml. Figures without image data are dropped with a
// MissingFigurePayload warning.
ArticleDocument parse_article(std::string_view xml_bytes, const ArticleSchema& schema = {});

// Figure ordinals mentioned in plain text ("Figure 3", "Fig. 2", "Figs. 1 and 4").
std::vector<int> figure_mentions(std::string_view text);

struct ImageTextPair {
    std::string pair_id;
    PreprocessedImage image;
    TokenizedText text;
    std::optional<AbsLabel> label;
    std::string source;
    Split split = Split::Unsplit;
};

struct ExtractResult {
    std::vector<ImageTextPair> pairs;
    std::vector<Warning> warnings;
};

// One pair per (figure, referencing paragraph); a figure nobody references
// yields a single caption-only pair. Text is caption then paragraph.
ExtractResult extract_pairs(const ArticleDocument& doc, int image_size = 300);

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

inline constexpr const char* kSyntheticGeneratorVersion = "absnet-synth-1";

struct DrawnShape {
    std::string kind;   // rectangle | circle | line
    std::string color;  // palette name
    bool filled = true;
};

struct SyntheticPair {
    ImageTextPair pair;
    std::vector<DrawnShape> drawn;  // construction log
};

std::vector<SyntheticPair> generate_synthetic_corpus(int n_per_class, std::uint64_t seed, int image_size = 300);

// Assigns `test` to exactly test_per_class pairs of each class, `train` to the
// rest. Throws InsufficientClassMembers or InvalidArgument.
void split_dataset(std::vector<ImageTextPair>& pairs, int test_per_class, std::uint64_t seed);

}  // namespace absnet
