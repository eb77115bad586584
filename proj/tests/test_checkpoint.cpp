#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "absnet/checkpoint.hpp"
#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"
#include "absnet/features.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace absnet;
using testing::TempDir;

namespace {

std::string error_message(const std::function<void()>& f, std::string* code = nullptr) {
    try {
        f();
    } catch (const Error& e) {
        if (code) *code = e.code();
        return e.what();
    }
    return "";
}

template <class T>
ParameterStore<T> random_store(Rng& rng) {
    ParameterStore<T> s;
    for (auto& [name, shape] : std::vector<std::pair<std::string, std::vector<int>>>{
             {"enc.a.w", {3, 4}}, {"enc.a.b", {3}}, {"cls.fc0.w", {2, 2, 3, 3}}, {"scalar", {1}}}) {
        auto v = s.add(name, shape);
        for (auto& x : v) x = static_cast<T>(rng.uniform(-5, 5));
    }
    return s;
}

}  // namespace

TEST_CASE("parameter stores round-trip bit-exactly in both precisions") {
    Rng rng(1);
    TempDir dir("ckpt");
    const auto f = random_store<float>(rng);
    save_store(f, dir / "f");
    const auto f2 = load_store<float>(dir / "f");
    REQUIRE(f2.entries().size() == f.entries().size());
    for (std::size_t i = 0; i < f.entries().size(); ++i) {
        CHECK(f2.entries()[i].name == f.entries()[i].name);
        CHECK(f2.entries()[i].shape == f.entries()[i].shape);
        CHECK(f2.entries()[i].values == f.entries()[i].values);
    }
    const auto d = random_store<double>(rng);
    save_store(d, dir / "d");
    CHECK(load_store<double>(dir / "d").get("enc.a.w")[5] == d.get("enc.a.w")[5]);
    // float file read as double is a dtype error
    std::string code;
    error_message([&] { load_store<double>(dir / "f"); }, &code);
    CHECK(code == "CorruptCheckpoint");
}

TEST_CASE("params.bin is little-endian float32 at the manifest offsets") {
    TempDir dir("ckpt");
    ParameterStore<float> s;
    s.add("a", {2})[1] = 1.0f;
    s.add("b", {1})[0] = -2.0f;
    save_store(s, dir.path());
    const std::string bin = read_file(dir / "params.bin");
    REQUIRE(bin.size() == 12);
    // 1.0f = 0x3f800000, -2.0f = 0xc0000000
    CHECK(bin.substr(4, 4) == std::string("\x00\x00\x80\x3f", 4));
    CHECK(bin.substr(8, 4) == std::string("\x00\x00\x00\xc0", 4));
    const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(m["entries"][1]["offset"] == 8);
    CHECK(m["entries"][1]["dtype"] == "f32");
}

TEST_CASE("corrupt stores are rejected with a precise reason") {
    Rng rng(2);
    TempDir dir("ckpt");
    const auto s = random_store<float>(rng);
    std::string code;

    CHECK(!error_message([&] { load_store<float>(dir / "nothing"); }, &code).empty());
    CHECK(code == "CheckpointNotFound");

    save_store(s, dir.path());
    const std::string bin = read_file(dir / "params.bin");
    write_file(dir / "params.bin", bin.substr(0, bin.size() - 4));
    CHECK(!error_message([&] { load_store<float>(dir.path()); }, &code).empty());
    CHECK(code == "CorruptCheckpoint");

    write_file(dir / "params.bin", bin + "xxxx");
    CHECK(error_message([&] { load_store<float>(dir.path()); }, &code).find("params.bin") != std::string::npos);
    CHECK(code == "CorruptCheckpoint");

    write_file(dir / "params.bin", bin);
    write_file(dir / "manifest.json", "{\"entries\": [");
    error_message([&] { load_store<float>(dir.path()); }, &code);
    CHECK(code == "CorruptCheckpoint");

    save_store(s, dir.path());
    auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    m["entries"][1]["shape"] = {7};
    write_file(dir / "manifest.json", m.dump());
    CHECK(error_message([&] { load_store<float>(dir.path()); }, &code).find("enc.a.b") != std::string::npos);
}

TEST_CASE("full checkpoints keep config, vocabulary, iteration and history") {
    Rng rng(3);
    TempDir dir("ckpt");
    Checkpoint ck;
    ck.params = random_store<float>(rng);
    ck.config = RunConfig::defaults(Profile::Desk);
    ck.config.set("learning_rate", "0.00025");
    ck.config.train.regime = Regime::ClTransfer;
    const auto t = TokenizedText{{{"a", "b", "a"}}};
    ck.vocab = build_vocab({&t}, 10);
    ck.iteration = 123;
    ck.history = {{{"iteration", 100}, {"combined", 0.5}}};
    save_checkpoint(ck, dir.path());
    const Checkpoint back = load_checkpoint(dir.path());
    CHECK(back.iteration == 123);
    CHECK(back.config.to_kv() == ck.config.to_kv());
    CHECK(back.config.train.regime == Regime::ClTransfer);
    CHECK(back.vocab.tokens() == ck.vocab.tokens());
    REQUIRE(back.history.size() == 1);
    CHECK(back.history[0]["combined"] == 0.5);
    CHECK(back.params.get("cls.fc0.w")[17] == ck.params.get("cls.fc0.w")[17]);

    // saving twice gives identical bytes
    save_checkpoint(back, dir / "again");
    for (const char* f : {"manifest.json", "params.bin", "config.json", "history.jsonl", "vocab.tsv"})
        CHECK(read_file(dir / f) == read_file(dir / "again" / f));
}

TEST_CASE("restoring from a differently configured checkpoint names the offending entry") {
    Rng rng(4);
    auto dst = random_store<float>(rng);
    ParameterStore<float> src;
    src.add("enc.a.w", {3, 5});  // width differs
    src.add("enc.a.b", {3});
    std::string code;
    const auto msg = error_message(
        [&] { restore_entries(dst, src, [](const std::string& n) { return n.rfind("enc.", 0) == 0; }); }, &code);
    CHECK(code == "CorruptCheckpoint");
    CHECK(msg.find("enc.a.w") != std::string::npos);
    CHECK(msg.find("[3, 5]") != std::string::npos);

    ParameterStore<float> partial;
    partial.add("enc.a.w", {3, 4});
    const auto msg2 = error_message(
        [&] { restore_entries(dst, partial, [](const std::string& n) { return n.rfind("enc.", 0) == 0; }); });
    CHECK(msg2.find("missing entry enc.a.b") != std::string::npos);

    // selected entries copied, others untouched
    auto fresh = random_store<float>(rng);
    const auto before = fresh.get("cls.fc0.w")[0];
    restore_entries(fresh, dst, [](const std::string& n) { return n.rfind("enc.", 0) == 0; });
    CHECK(fresh.get("enc.a.w")[3] == dst.get("enc.a.w")[3]);
    CHECK(fresh.get("cls.fc0.w")[0] == before);
}

TEST_CASE("feature stores round-trip and validate") {
    TempDir dir("feat");
    FeatureStore fs(3);
    fs.add("p1", {1, 2, 3});
    fs.add("p0", {4, 5, 6});
    std::string code;
    error_message([&] { fs.add("p1", {0, 0, 0}); }, &code);
    CHECK(code == "DuplicatePair");
    error_message([&] { fs.add("p2", {0, 0}); }, &code);
    CHECK(code == "DimensionMismatch");
    fs.save(dir / "feat.idx");
    const FeatureStore back = FeatureStore::load(dir / "feat.idx");
    REQUIRE(back.find("p0"));
    CHECK(*back.find("p0") == std::vector<float>{4, 5, 6});
    CHECK(back.find("zzz") == nullptr);

    // index promises two records, record file holds two, but only one is listed
    write_file(dir / "bad.idx", "absnet-features 3 2\np1 0\n");
    write_file(dir / "bad.bin", std::string(24, '\0'));
    CHECK(error_message([&] { FeatureStore::load(dir / "bad.idx"); }, &code).find("bad entry 1") != std::string::npos);
    CHECK(code == "MalformedFeatureFile");
    write_file(dir / "bad.bin", std::string(20, '\0'));
    error_message([&] { FeatureStore::load(dir / "bad.idx"); }, &code);
    CHECK(code == "MalformedFeatureFile");
}
