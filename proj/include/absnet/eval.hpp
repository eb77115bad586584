#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absnet/checkpoint.hpp"
#include "absnet/classifier.hpp"
#include "absnet/corpus.hpp"
#include "absnet/features.hpp"
#include "json.hpp"

namespace absnet {

// counts[i][j]: true class i predicted as class j.
struct ConfusionMatrix3 {
    std::array<std::array<long, kNumClasses>, kNumClasses> counts{};

    void add(AbsLabel truth, AbsLabel predicted) { ++counts[std::size_t(truth)][std::size_t(predicted)]; }
    long total() const;
    long row_sum(int i) const;
    long column_sum(int j) const;
    bool operator==(const ConfusionMatrix3&) const = default;
};

// Exact count ratio; undefined when the denominator is zero.
struct Ratio {
    long num = 0;
    long den = 0;

    bool defined() const { return den > 0; }
    double value() const { return double(num) / double(den); }
    // 100 * num / den with two decimals, rounded half up in integer
    // arithmetic; "undefined" when den == 0.
    std::string percent() const;
    bool operator==(const Ratio& o) const { return num * o.den == o.num * den && defined() == o.defined(); }
};

struct MetricsReport {
    std::string regime;
    ConfusionMatrix3 matrix;
    std::array<Ratio, kNumClasses> precision;
    std::array<Ratio, kNumClasses> recall;
    Ratio accuracy;
};

// Throws EmptyMatrix.
MetricsReport metrics(const ConfusionMatrix3& cm, const std::string& regime = "");

struct Prediction {
    std::string pair_id;
    std::optional<AbsLabel> truth;
    AbsLabel predicted = AbsLabel::ImageLessAbstract;
    ClassProbabilities probabilities{};
};

// Runs the checkpoint's encoder and classifier on every pair, sorted by
// pair_id.
std::vector<Prediction> predict_pairs(const Checkpoint& ckpt, const std::vector<const ImageTextPair*>& pairs,
                                      const FeatureStore* features = nullptr);

// Tally in pair_id order. Throws UnlabeledPair.
ConfusionMatrix3 tally(const std::vector<Prediction>& predictions);

// predict_pairs + tally. Throws EmptyDataset / UnlabeledPair.
ConfusionMatrix3 evaluate(const Checkpoint& ckpt, const std::vector<const ImageTextPair*>& test,
                          const FeatureStore* features = nullptr);

nlohmann::json prediction_to_json(const Prediction& p);
nlohmann::json report_to_json(const MetricsReport& r);
std::string report_markdown(const MetricsReport& r);

// Rows sorted by accuracy (descending), ties by regime name.
struct RegimeComparison {
    std::vector<MetricsReport> rows;
    nlohmann::json json;
    std::string markdown;
};

// Published accuracy of each regime on the original labelled corpus, which
// is not available here; shown as a reference column.
struct PublishedAccuracy {
    const char* regime;
    const char* accuracy;
};
inline constexpr std::array<PublishedAccuracy, 3> kPublishedAccuracy{{
    {"cl_transfer", "80.33"},
    {"cl_freeze", "77.33"},
    {"cl_scratch", "77.00"},
}};

RegimeComparison compare_regimes(std::vector<MetricsReport> reports);

// report.json, report.md, predictions.jsonl.
void write_eval_outputs(const std::filesystem::path& dir, const MetricsReport& report,
                        const std::vector<Prediction>& predictions);

}  // namespace absnet
