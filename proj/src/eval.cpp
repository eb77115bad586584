#include "absnet/eval.hpp"

#include <algorithm>
#include <sstream>

#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "absnet/trainer.hpp"

namespace absnet {

using nlohmann::json;

long ConfusionMatrix3::total() const {
    long t = 0;
    for (const auto& row : counts)
        for (long v : row) t += v;
    return t;
}

long ConfusionMatrix3::row_sum(int i) const {
    long t = 0;
    for (long v : counts[std::size_t(i)]) t += v;
    return t;
}

long ConfusionMatrix3::column_sum(int j) const {
    long t = 0;
    for (const auto& row : counts) t += row[std::size_t(j)];
    return t;
}

std::string Ratio::percent() const {
    if (!defined()) return "undefined";
    // hundredths of a percent, half up
    const long long scaled = (static_cast<long long>(num) * 20000 + den) / (2LL * den);
    std::ostringstream os;
    os << scaled / 100 << '.';
    const long long frac = scaled % 100;
    if (frac < 10) os << '0';
    os << frac;
    return os.str();
}

MetricsReport metrics(const ConfusionMatrix3& cm, const std::string& regime) {
    const long total = cm.total();
    if (total <= 0) throw data_error("EmptyMatrix", "confusion matrix has no counts");
    MetricsReport r;
    r.regime = regime;
    r.matrix = cm;
    long trace = 0;
    for (int k = 0; k < kNumClasses; ++k) {
        const long diag = cm.counts[std::size_t(k)][std::size_t(k)];
        trace += diag;
        r.precision[std::size_t(k)] = Ratio{diag, cm.column_sum(k)};
        r.recall[std::size_t(k)] = Ratio{diag, cm.row_sum(k)};
    }
    r.accuracy = Ratio{trace, total};
    return r;
}

std::vector<Prediction> predict_pairs(const Checkpoint& ckpt, const std::vector<const ImageTextPair*>& pairs,
                                      const FeatureStore* features) {
    const Model model(ckpt.config);
    const auto samples = build_samples(pairs, ckpt.vocab, ckpt.config, features);
    std::vector<Prediction> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto z = model.encode<float>(ckpt.params, samples[i]);
        const auto probs = model.class_probabilities<float>(ckpt.params, z);
        Prediction p;
        p.pair_id = samples[i].pair_id;
        p.truth = pairs[i]->label;
        p.predicted = argmax_label<float>(probs);
        for (int k = 0; k < kNumClasses; ++k) p.probabilities[std::size_t(k)] = probs[std::size_t(k)];
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
    return out;
}

ConfusionMatrix3 tally(const std::vector<Prediction>& predictions) {
    std::vector<const Prediction*> order;
    for (const auto& p : predictions) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->pair_id < b->pair_id; });
    ConfusionMatrix3 cm;
    for (const auto* p : order) {
        if (!p->truth) throw data_error("UnlabeledPair", "pair " + p->pair_id + " has no label");
        cm.add(*p->truth, p->predicted);
    }
    return cm;
}

ConfusionMatrix3 evaluate(const Checkpoint& ckpt, const std::vector<const ImageTextPair*>& test,
                          const FeatureStore* features) {
    if (test.empty()) throw data_error("EmptyDataset", "no test pairs");
    for (const auto* p : test)
        if (!p->label) throw data_error("UnlabeledPair", "pair " + p->pair_id + " has no label");
    return tally(predict_pairs(ckpt, test, features));
}

json prediction_to_json(const Prediction& p) {
    json probs = json::object();
    for (int k = 0; k < kNumClasses; ++k) probs[label_string(AbsLabel(k))] = p.probabilities[std::size_t(k)];
    return json{{"pair_id", p.pair_id},
                {"label", p.truth ? json(label_string(*p.truth)) : json(nullptr)},
                {"predicted", label_string(p.predicted)},
                {"probabilities", probs}};
}

namespace {

json ratio_json(const Ratio& r) {
    return json{{"numerator", r.num},
                {"denominator", r.den},
                {"percent", r.defined() ? json(r.percent()) : json(nullptr)},
                {"defined", r.defined()}};
}

}  // namespace

json report_to_json(const MetricsReport& r) {
    json per_class = json::object();
    for (int k = 0; k < kNumClasses; ++k)
        per_class[label_string(AbsLabel(k))] = {{"precision", ratio_json(r.precision[std::size_t(k)])},
                                               {"recall", ratio_json(r.recall[std::size_t(k)])}};
    json counts = json::array();
    for (const auto& row : r.matrix.counts) counts.push_back(row);
    return json{{"regime", r.regime},
                {"classes", {label_string(AbsLabel(0)), label_string(AbsLabel(1)), label_string(AbsLabel(2))}},
                {"confusion_matrix", counts},
                {"per_class", per_class},
                {"accuracy", ratio_json(r.accuracy)},
                {"total", r.matrix.total()}};
}

std::string report_markdown(const MetricsReport& r) {
    std::ostringstream os;
    os << "# Classification report" << (r.regime.empty() ? "" : " (" + r.regime + ")") << "\n\n";
    os << "| true \\ predicted |";
    for (int k = 0; k < kNumClasses; ++k) os << ' ' << label_string(AbsLabel(k)) << " |";
    os << "\n|---|---|---|---|\n";
    for (int i = 0; i < kNumClasses; ++i) {
        os << "| " << label_string(AbsLabel(i)) << " |";
        for (int j = 0; j < kNumClasses; ++j) os << ' ' << r.matrix.counts[std::size_t(i)][std::size_t(j)] << " |";
        os << '\n';
    }
    auto cell = [](const Ratio& q) { return q.defined() ? q.percent() + "%" : std::string("undefined"); };
    os << "| precision |";
    for (const auto& q : r.precision) os << ' ' << cell(q) << " |";
    os << "\n| recall |";
    for (const auto& q : r.recall) os << ' ' << cell(q) << " |";
    os << "\n\nAccuracy: " << cell(r.accuracy) << " (" << r.accuracy.num << "/" << r.accuracy.den << ")\n";
    return os.str();
}

RegimeComparison compare_regimes(std::vector<MetricsReport> reports) {
    if (reports.empty()) throw usage_error("InvalidArgument", "compare_regimes needs at least one report");
    std::stable_sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
        // exact comparison a.num/a.den > b.num/b.den
        const long long l = static_cast<long long>(a.accuracy.num) * b.accuracy.den;
        const long long r = static_cast<long long>(b.accuracy.num) * a.accuracy.den;
        if (l != r) return l > r;
        return a.regime < b.regime;
    });
    RegimeComparison c;
    c.json = json::array();
    std::ostringstream md;
    md << "| regime | accuracy | correct / total | published |\n|---|---|---|---|\n";
    for (const auto& r : reports) {
        std::string ref = "-";
        for (const auto& p : kPublishedAccuracy)
            if (r.regime == p.regime) ref = std::string(p.accuracy) + "%";
        c.json.push_back({{"regime", r.regime},
                          {"accuracy", r.accuracy.percent()},
                          {"correct", r.accuracy.num},
                          {"total", r.accuracy.den},
                          {"published", ref == "-" ? json(nullptr) : json(ref)}});
        md << "| " << r.regime << " | " << r.accuracy.percent() << "% | " << r.accuracy.num << " / " << r.accuracy.den
           << " | " << ref << " |\n";
    }
    c.markdown = md.str();
    c.rows = std::move(reports);
    return c;
}

void write_eval_outputs(const std::filesystem::path& dir, const MetricsReport& report,
                        const std::vector<Prediction>& predictions) {
    write_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_file(dir / "report.md", report_markdown(report));
    std::string lines;
    for (const auto& p : predictions) lines += prediction_to_json(p).dump() + "\n";
    write_file(dir / "predictions.jsonl", lines);
}

}  // namespace absnet
