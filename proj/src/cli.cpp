#include "absnet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "absnet/checkpoint.hpp"
#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "absnet/eval.hpp"
#include "absnet/features.hpp"
#include "absnet/kernels.hpp"
#include "absnet/trainer.hpp"

namespace absnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string profile;
    std::vector<std::string> sets;
    long seed = -1;
    bool deterministic = false;
    int threads = -1;
};

struct Args {
    Common common;
    std::string dataset, out, xml_dir, ckpt, init, regime, block, image, text, features;
    int per_class = 0, test_per_class = -1, n = 4, vocab_max = -1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Key = value configuration file");
    sub->add_option("--profile", c.profile, "desk | paper-scale (default: $ABSNET_PROFILE or desk)");
    sub->add_option("--set", c.sets, "Override a configuration key (key=value), repeatable");
    sub->add_option("--seed", c.seed, "Root seed");
    sub->add_flag("--deterministic", c.deterministic, "Single-threaded, bit-reproducible execution");
    sub->add_option("--threads", c.threads, "Cap on worker threads");
}

RunConfig resolve_config(const Common& c) {
    std::vector<std::pair<std::string, std::string>> ov;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw usage_error("BadOverride", "--set expects key=value, got '" + s + "'");
        ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed >= 0) ov.emplace_back("seed", std::to_string(c.seed));
    if (c.deterministic) ov.emplace_back("deterministic", "1");
    if (c.threads >= 0) ov.emplace_back("threads", std::to_string(c.threads));
    const Profile p = c.profile.empty() ? default_profile() : parse_profile(c.profile);
    return load_config(c.config, p, ov);
}

std::vector<const ImageTextPair*> training_pairs(const Dataset& ds) {
    auto train = ds.with_split(Split::Train);
    if (!train.empty()) return train;
    return ds.with_split(Split::Unsplit);
}

std::unique_ptr<FeatureStore> maybe_features(const RunConfig& cfg, const std::string& flag) {
    const std::string path = flag.empty() ? cfg.features_path : flag;
    if (cfg.enc.backbone != ImageBackbone::ExternalFeatures) return nullptr;
    if (path.empty()) throw usage_error("MissingFeatures", "image_backbone = external_features needs features_path");
    auto fs = std::make_unique<FeatureStore>(FeatureStore::load(path));
    if (fs->dim() != cfg.enc.d_img)
        throw data_error("DimensionMismatch", "feature width " + std::to_string(fs->dim()) + " but d_img = " +
                                                  std::to_string(cfg.enc.d_img));
    return fs;
}

Vocabulary dataset_vocab(const Dataset& ds, const std::vector<const ImageTextPair*>& train, int max_size) {
    if (fs::exists(ds.root / "vocab.tsv")) return load_vocab_tsv(ds.root / "vocab.tsv");
    std::vector<const TokenizedText*> texts;
    for (const auto* p : train) texts.push_back(&p->text);
    return build_vocab(texts, max_size);
}

EmbeddingTable embeddings_for(const RunConfig& cfg, const Vocabulary& vocab) {
    const auto seed = derive_seed(cfg.train.seed, "embeddings");
    if (!cfg.vectors_path.empty()) return load_embeddings(cfg.vectors_path, vocab, cfg.enc.word_dim, seed);
    return init_random_embeddings(vocab, cfg.enc.word_dim, seed);
}

std::function<void(const json&)> progress(std::ostream& err) {
    return [&err](const json& rec) { err << rec.dump() << '\n'; };
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Args& a, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(a.common);
    if (!fs::is_directory(a.xml_dir)) throw data_error("DirectoryNotFound", a.xml_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.xml_dir))
        if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<ImageTextPair> pairs;
    json warnings = json::array();
    for (const auto& f : files) {
        const auto doc = parse_article(read_file(f));
        auto res = extract_pairs(doc, cfg.enc.image_size);
        for (auto& w : doc.warnings) res.warnings.insert(res.warnings.begin(), w);
        for (const auto& w : res.warnings) {
            err << "warning: " << w.code << " " << w.where << ": " << w.message << '\n';
            warnings.push_back({{"code", w.code}, {"where", w.where}, {"message", w.message}});
        }
        for (auto& p : res.pairs) pairs.push_back(std::move(p));
    }
    write_dataset(a.out, pairs, json{{"source", "ingest"}, {"articles", files.size()}, {"warnings", warnings}});
    out << json{{"articles", files.size()}, {"pairs", pairs.size()}, {"warnings", warnings.size()}}.dump() << '\n';
    return 0;
}

int cmd_synth(const Args& a, std::ostream& out, std::ostream&) {
    const RunConfig cfg = resolve_config(a.common);
    if (a.per_class <= 0) throw usage_error("InvalidArgument", "--per-class must be positive");
    auto synth = generate_synthetic_corpus(a.per_class, cfg.train.seed, cfg.enc.image_size);
    std::vector<ImageTextPair> pairs;
    for (auto& s : synth) pairs.push_back(std::move(s.pair));
    if (a.test_per_class >= 0) split_dataset(pairs, a.test_per_class, cfg.train.seed);
    write_dataset(a.out, pairs,
                  json{{"source", "synthetic"},
                       {"generator", kSyntheticGeneratorVersion},
                       {"seed", cfg.train.seed},
                       {"per_class", a.per_class},
                       {"test_per_class", a.test_per_class >= 0 ? json(a.test_per_class) : json(nullptr)}});
    out << json{{"pairs", pairs.size()}, {"dataset", a.out}}.dump() << '\n';
    return 0;
}

int cmd_vocab(const Args& a, std::ostream& out, std::ostream&) {
    const RunConfig cfg = resolve_config(a.common);
    const Dataset ds = read_dataset(a.dataset);
    std::vector<const TokenizedText*> texts;
    for (const auto* p : training_pairs(ds)) texts.push_back(&p->text);
    const auto v = build_vocab(texts, a.vocab_max > 0 ? a.vocab_max : cfg.vocab_max);
    const fs::path dest = a.out.empty() ? ds.root / "vocab.tsv" : fs::path(a.out);
    save_vocab_tsv(v, dest);
    out << json{{"kept", v.regular_size()},
                {"distinct", v.distinct_tokens},
                {"occurrences", v.total_occurrences},
                {"coverage", v.coverage},
                {"path", dest.string()}}
               .dump()
        << '\n';
    return 0;
}

int cmd_pretrain(const Args& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = resolve_config(a.common);
    cfg.train.regime = Regime::PretrainAe;
    const Dataset ds = read_dataset(a.dataset);
    const auto train = training_pairs(ds);
    const auto vocab = dataset_vocab(ds, train, cfg.vocab_max);
    const auto emb = embeddings_for(cfg, vocab);
    const auto features = maybe_features(cfg, a.features);
    TrainInputs in{train, features.get(), &vocab, &emb, nullptr};
    const auto ck = pretrain_autoencoder(in, cfg, TrainHooks{a.out, progress(err)});
    save_checkpoint(ck, a.out);
    out << json{{"checkpoint", a.out}, {"iterations", ck.iteration}}.dump() << '\n';
    return 0;
}

std::vector<const ImageTextPair*> test_pairs(const Dataset& ds) { return ds.with_split(Split::Test); }

MetricsReport evaluate_into(const Checkpoint& ck, const Dataset& ds, const FeatureStore* features,
                            const fs::path& dir) {
    const auto test = test_pairs(ds);
    if (test.empty()) throw data_error("EmptyDataset", "dataset has no test split");
    for (const auto* p : test)
        if (!p->label) throw data_error("UnlabeledPair", "test pair " + p->pair_id + " has no label");
    const auto preds = predict_pairs(ck, test, features);
    const auto report = metrics(tally(preds), regime_name(ck.config.train.regime));
    write_eval_outputs(dir, report, preds);
    return report;
}

int cmd_train(const Args& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = resolve_config(a.common);
    cfg.train.regime = parse_regime(a.regime);
    if (cfg.train.regime == Regime::PretrainAe)
        throw usage_error("InvalidArgument", "--regime must be scratch, freeze or transfer");
    if (cfg.train.regime != Regime::ClScratch && a.init.empty())
        throw usage_error("MissingInitCheckpoint", "--init is required for --regime " + a.regime);
    const Dataset ds = read_dataset(a.dataset);
    const auto train = training_pairs(ds);
    const auto features = maybe_features(cfg, a.features);
    std::unique_ptr<Checkpoint> init;
    if (!a.init.empty()) init = std::make_unique<Checkpoint>(load_checkpoint(a.init));
    std::unique_ptr<Vocabulary> vocab;
    std::unique_ptr<EmbeddingTable> emb;
    if (cfg.train.regime == Regime::ClScratch) {
        vocab = std::make_unique<Vocabulary>(init ? init->vocab : dataset_vocab(ds, train, cfg.vocab_max));
        emb = std::make_unique<EmbeddingTable>(embeddings_for(cfg, *vocab));
    }
    TrainInputs in{train, features.get(), vocab.get(), emb.get(), init.get()};
    const auto ck = train_classifier(in, cfg, TrainHooks{a.out, progress(err)});
    save_checkpoint(ck, a.out);
    json rec{{"checkpoint", a.out}, {"iterations", ck.iteration}};
    if (!test_pairs(ds).empty()) {
        const auto report = evaluate_into(ck, ds, features.get(), a.out);
        rec["accuracy"] = report.accuracy.percent();
    }
    out << rec.dump() << '\n';
    return 0;
}

int cmd_eval(const Args& a, std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(a.ckpt);
    const Dataset ds = read_dataset(a.dataset);
    const auto features = maybe_features(ck.config, a.features);
    const fs::path dir = a.out.empty() ? fs::path(a.ckpt) : fs::path(a.out);
    const auto report = evaluate_into(ck, ds, features.get(), dir);
    out << report_markdown(report);
    return 0;
}

int cmd_predict(const Args& a, std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(a.ckpt);
    if (!ck.params.contains("cls.fc0.w")) throw usage_error("InvalidArgument", "--ckpt has no classifier");
    if (ck.config.enc.backbone != ImageBackbone::DeskCnn)
        throw usage_error("InvalidArgument", "predict supports the desk image backbone only");
    ImageTextPair pair;
    pair.pair_id = fs::path(a.image).filename().string();
    pair.image = preprocess_image(read_file(a.image), ck.config.enc.image_size);
    pair.text = clean_text(read_file(a.text), ck.config.enc.max_sentences, ck.config.enc.max_words);
    const auto preds = predict_pairs(ck, {&pair});
    out << prediction_to_json(preds.front()).dump() << '\n';
    return 0;
}

int cmd_gradcheck(const Args& a, std::ostream& out, std::ostream&) {
    const auto blocks = a.block.empty() ? gradient_blocks() : std::vector<std::string>{a.block};
    bool ok = true;
    for (const auto& b : blocks) {
        const auto r = check_block(b, a.common.seed >= 0 ? std::uint64_t(a.common.seed) : 7);
        const bool pass = r.max_rel_error <= 1e-4;
        ok = ok && pass;
        out << json{{"block", b},
                    {"max_rel_error", r.max_rel_error},
                    {"worst_entry", r.worst_entry},
                    {"worst_index", r.worst_index},
                    {"worst_analytic", r.worst_analytic},
                    {"worst_numeric", r.worst_numeric},
                    {"checked", r.checked},
                    {"pass", pass}}
                   .dump()
            << '\n';
    }
    if (!ok) throw numeric_error("GradientMismatch", "relative error above 1e-4");
    return 0;
}

int cmd_dump_recon(const Args& a, std::ostream& out, std::ostream&) {
    const Checkpoint ck = load_checkpoint(a.ckpt);
    if (!ck.params.contains("dec.img.seed.w")) throw usage_error("InvalidArgument", "--ckpt has no decoder");
    const Dataset ds = read_dataset(a.dataset);
    const auto features = maybe_features(ck.config, a.features);
    std::vector<const ImageTextPair*> pairs;
    for (const auto& p : ds.pairs) pairs.push_back(&p);
    std::sort(pairs.begin(), pairs.end(), [](const auto* x, const auto* y) { return x->pair_id < y->pair_id; });
    if (static_cast<int>(pairs.size()) > a.n) pairs.resize(std::size_t(std::max(a.n, 0)));
    const auto samples = build_samples(pairs, ck.vocab, ck.config, features.get());
    const Model model(ck.config);
    EmbeddingTable table;
    table.rows = ck.params.shape(kEmbeddingTable)[0];
    table.dim = ck.params.shape(kEmbeddingTable)[1];
    const auto tv = ck.params.get(kEmbeddingTable);
    table.values.assign(tv.begin(), tv.end());
    const fs::path dir = a.out.empty() ? fs::path(a.ckpt) / "recon" : fs::path(a.out);
    std::ostringstream md;
    md << "# Reconstructions\n";
    const int S = ck.config.enc.image_size;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto z = model.encode<float>(ck.params, s);
        const auto recon = model.image_decoder().forward<float>(ck.params, z, nullptr);
        const auto orig_rgb = to_rgb(chw_to_hwc<float>(s.chw, S, S), S, S);
        const auto recon_rgb = to_rgb(chw_to_hwc<float>(recon, S, S), S, S);
        RgbImage side;
        side.height = S;
        side.width = 2 * S;
        side.data.resize(std::size_t(S) * 2 * S * 3);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < 2 * S; ++x)
                for (int c = 0; c < 3; ++c) {
                    const auto& src = x < S ? orig_rgb : recon_rgb;
                    side.data[(std::size_t(y) * 2 * S + x) * 3 + c] =
                        src.data[(std::size_t(y) * S + (x % S)) * 3 + c];
                }
        const std::string name = "pair-" + std::to_string(i) + ".png";
        write_file(dir / name, encode_png(side));

        const auto steps = unroll_lengths(s.grid);
        typename TextDecoder::template Trace<float> tt;
        model.text_decoder().forward<float>(ck.params, z, steps, tt);
        const int E = model.text_decoder().output_dim();
        md << "\n## " << s.pair_id << "\n\n![" << s.pair_id << "](" << name << ")\n\n";
        const auto original = decode_tokens(s.grid, ck.vocab);
        for (std::size_t r = 0; r < steps.size(); ++r) {
            if (steps[r] == 0) continue;
            std::string in_line, out_line;
            for (int c = 0; c < steps[r]; ++c) {
                if (!s.grid.real(int(r), c)) continue;
                in_line += ck.vocab.token(s.grid.at(int(r), c)) + " ";
                out_line += nearest_token(std::span<const float>(tt.sentences[r].words.data() + std::size_t(c) * E,
                                                                 std::size_t(E)),
                                          table, ck.vocab) +
                            " ";
            }
            md << "- input: " << in_line << "\n- output: " << out_line << "\n";
        }
        (void)original;
    }
    write_file(dir / "recon.md", md.str());
    out << json{{"pairs", samples.size()}, {"dir", dir.string()}}.dump() << '\n';
    return 0;
}

int cmd_compare(const std::vector<std::string>& reports, const std::string& outdir, std::ostream& out) {
    std::vector<MetricsReport> rs;
    for (const auto& path : reports) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw data_error("CorruptReport", path + ": " + e.what());
        }
        ConfusionMatrix3 cm;
        for (int i = 0; i < kNumClasses; ++i)
            for (int k = 0; k < kNumClasses; ++k) cm.counts[std::size_t(i)][std::size_t(k)] = j.at("confusion_matrix")[i][k];
        rs.push_back(metrics(cm, j.at("regime").get<std::string>()));
    }
    const auto c = compare_regimes(rs);
    if (!outdir.empty()) {
        write_file(fs::path(outdir) / "comparison.json", c.json.dump(2) + "\n");
        write_file(fs::path(outdir) / "comparison.md", c.markdown);
    }
    out << c.markdown;
    return 0;
}

struct Dispatch {
    CLI::App app{"Image-text abstractness (ABS) prediction with a multimodal autoencoder", "absnet"};
    Args args;
    std::vector<std::string> report_paths;
    std::vector<std::pair<CLI::App*, std::function<int(std::ostream&, std::ostream&)>>> table;

    Dispatch() {
        app.require_subcommand(1);
        app.set_help_flag("-h,--help", "Print help for every subcommand");
        auto& a = args;

        auto* ingest = app.add_subcommand("ingest", "Extract image-text pairs from XML articles");
        ingest->add_option("xml-dir", a.xml_dir, "Directory of article XML files")->required();
        ingest->add_option("out-dataset", a.out, "Output dataset directory")->required();
        add_common(ingest, a.common);
        table.emplace_back(ingest, [this](auto& o, auto& e) { return cmd_ingest(args, o, e); });

        auto* synth = app.add_subcommand("synth", "Generate the labelled synthetic corpus");
        synth->add_option("--per-class", a.per_class, "Pairs per class")->required();
        synth->add_option("--test-per-class", a.test_per_class, "Test pairs per class (omit: unsplit)");
        synth->add_option("out-dataset", a.out, "Output dataset directory")->required();
        add_common(synth, a.common);
        table.emplace_back(synth, [this](auto& o, auto& e) { return cmd_synth(args, o, e); });

        auto* vocab = app.add_subcommand("vocab", "Build the frequency-ranked vocabulary");
        vocab->add_option("dataset", a.dataset, "Dataset directory")->required();
        vocab->add_option("--max", a.vocab_max, "Vocabulary size (default: vocab_max)");
        vocab->add_option("--out", a.out, "Output path (default: <dataset>/vocab.tsv)");
        add_common(vocab, a.common);
        table.emplace_back(vocab, [this](auto& o, auto& e) { return cmd_vocab(args, o, e); });

        auto* pretrain = app.add_subcommand("pretrain", "Pretrain the autoencoder");
        pretrain->add_option("dataset", a.dataset, "Dataset directory")->required();
        pretrain->add_option("--out", a.out, "Checkpoint directory")->required();
        pretrain->add_option("--features", a.features, "External image feature index");
        add_common(pretrain, a.common);
        table.emplace_back(pretrain, [this](auto& o, auto& e) { return cmd_pretrain(args, o, e); });

        auto* train = app.add_subcommand("train", "Train the classifier under one regime");
        train->add_option("dataset", a.dataset, "Dataset directory")->required();
        train->add_option("--regime", a.regime, "scratch | freeze | transfer")->required();
        train->add_option("--init", a.init, "Pretrained checkpoint (freeze, transfer)");
        train->add_option("--out", a.out, "Checkpoint directory")->required();
        train->add_option("--features", a.features, "External image feature index");
        add_common(train, a.common);
        table.emplace_back(train, [this](auto& o, auto& e) { return cmd_train(args, o, e); });

        auto* eval = app.add_subcommand("eval", "Evaluate a classifier on the test split");
        eval->add_option("dataset", a.dataset, "Dataset directory")->required();
        eval->add_option("--ckpt", a.ckpt, "Classifier checkpoint")->required();
        eval->add_option("--out", a.out, "Report directory (default: the checkpoint)");
        eval->add_option("--features", a.features, "External image feature index");
        table.emplace_back(eval, [this](auto& o, auto& e) { return cmd_eval(args, o, e); });

        auto* predict = app.add_subcommand("predict", "Predict the class of one image-text pair");
        predict->add_option("--ckpt", a.ckpt, "Classifier checkpoint")->required();
        predict->add_option("--image", a.image, "PNG or JPEG file")->required();
        predict->add_option("--text", a.text, "Text file")->required();
        table.emplace_back(predict, [this](auto& o, auto& e) { return cmd_predict(args, o, e); });

        auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
        grad->add_option("--block", a.block, "One block (default: all)");
        grad->add_option("--seed", a.common.seed, "Probe seed");
        table.emplace_back(grad, [this](auto& o, auto& e) { return cmd_gradcheck(args, o, e); });

        auto* dump = app.add_subcommand("dump-recon", "Write original/reconstruction images and decoded text");
        dump->add_option("--ckpt", a.ckpt, "Autoencoder checkpoint")->required();
        dump->add_option("--dataset", a.dataset, "Dataset directory")->required();
        dump->add_option("--n", a.n, "Number of pairs");
        dump->add_option("--out", a.out, "Output directory (default: <ckpt>/recon)");
        dump->add_option("--features", a.features, "External image feature index");
        table.emplace_back(dump, [this](auto& o, auto& e) { return cmd_dump_recon(args, o, e); });

        auto* compare = app.add_subcommand("compare", "Tabulate report.json files by accuracy");
        compare->add_option("reports", report_paths, "report.json files")->required();
        compare->add_option("--out", a.out, "Directory for comparison.json / comparison.md");
        table.emplace_back(compare, [this](auto& o, auto&) { return cmd_compare(report_paths, args.out, o); });
    }
};

}  // namespace

std::vector<std::string> subcommands() {
    Dispatch d;
    std::vector<std::string> out;
    for (const auto& [sub, fn] : d.table) out.push_back(sub->get_name());
    return out;
}

std::vector<std::string> declared_flags() {
    Dispatch d;
    std::vector<std::string> out;
    for (const auto& [sub, fn] : d.table)
        for (const auto* opt : sub->get_options())
            for (const auto& name : opt->get_lnames()) out.push_back(sub->get_name() + " --" + name);
    return out;
}

std::string help_text() {
    Dispatch d;
    return d.app.help("", CLI::AppFormatMode::All);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Dispatch d;
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        d.app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << d.app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }
    try {
        for (auto& [sub, fn] : d.table)
            if (sub->parsed()) return fn(out, err);
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace absnet::cli
