#include "absnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"

namespace absnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
constexpr const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

template <class T>
void append_le(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(b, sizeof(T));
}

template <class T>
T read_le(const char* p) {
    char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

json parse_json(const std::string& text, const fs::path& where) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw data_error("CorruptCheckpoint", where.string() + ": " + e.what());
    }
}

}  // namespace

template <class T>
void save_store(const ParameterStore<T>& store, const fs::path& dir) {
    fs::create_directories(dir);
    json entries = json::array();
    std::string bin;
    bin.reserve(store.total_size() * sizeof(T));
    for (const auto& e : store.entries()) {
        entries.push_back({{"name", e.name}, {"shape", e.shape}, {"dtype", dtype_name<T>()}, {"offset", bin.size()}});
        for (T v : e.values) append_le<T>(bin, v);
    }
    write_file(dir / "params.bin", bin);
    write_file(dir / "manifest.json", json{{"entries", entries}, {"bytes", bin.size()}}.dump(2) + "\n");
}

template <class T>
ParameterStore<T> load_store(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw data_error("CheckpointNotFound", "no checkpoint at " + dir.string());
    const json manifest = parse_json(read_file(dir / "manifest.json"), dir / "manifest.json");
    const std::string bin = read_file(dir / "params.bin");
    ParameterStore<T> store;
    try {
        std::size_t expected_offset = 0;
        std::string previous;
        for (const auto& e : manifest.at("entries")) {
            const std::string name = e.at("name");
            const std::vector<int> shape = e.at("shape");
            const std::string dtype = e.at("dtype");
            const std::size_t offset = e.at("offset");
            if (dtype != dtype_name<T>())
                throw data_error("CorruptCheckpoint", name + ": dtype " + dtype + ", expected " + dtype_name<T>());
            for (int d : shape)
                if (d < 0) throw data_error("CorruptCheckpoint", name + ": negative dimension");
            const std::size_t n = shape_size(shape);
            if (offset != expected_offset)
                throw data_error("CorruptCheckpoint", name + ": offset " + std::to_string(offset) + ", but " +
                                                          (previous.empty() ? "the first entry" : "entry " + previous) +
                                                          " ends at " + std::to_string(expected_offset));
            if (offset + n * sizeof(T) > bin.size())
                throw data_error("CorruptCheckpoint", name + ": shape " + shape_string(shape) + " at offset " +
                                                          std::to_string(offset) + " does not fit params.bin (" +
                                                          std::to_string(bin.size()) + " bytes)");
            auto dst = store.add(name, shape);
            for (std::size_t i = 0; i < n; ++i) dst[i] = read_le<T>(bin.data() + offset + i * sizeof(T));
            expected_offset = offset + n * sizeof(T);
            previous = name;
        }
        if (expected_offset != bin.size())
            throw data_error("CorruptCheckpoint", "params.bin has " + std::to_string(bin.size() - expected_offset) +
                                                      " trailing bytes");
    } catch (const json::exception& e) {
        throw data_error("CorruptCheckpoint", "manifest.json: " + std::string(e.what()));
    }
    return store;
}

template void save_store<float>(const ParameterStore<float>&, const fs::path&);
template void save_store<double>(const ParameterStore<double>&, const fs::path&);
template ParameterStore<float> load_store<float>(const fs::path&);
template ParameterStore<double> load_store<double>(const fs::path&);

json config_to_json(const RunConfig& cfg) {
    json j(cfg.to_kv());
    j["regime"] = regime_name(cfg.train.regime);
    return j;
}

RunConfig config_from_json(const json& j) {
    try {
        RunConfig cfg = RunConfig::defaults(parse_profile(j.at("profile").get<std::string>()));
        for (const auto& [k, v] : j.items()) {
            if (k == "profile" || k == "regime") continue;
            cfg.set(k, v.get<std::string>());
        }
        cfg.train.regime = parse_regime(j.at("regime").get<std::string>());
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw data_error("CorruptCheckpoint", "config.json: " + std::string(e.what()));
    } catch (const Error& e) {
        throw data_error("CorruptCheckpoint", "config.json: " + std::string(e.what()));
    }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
    save_store(ckpt.params, dir);
    json cfg = config_to_json(ckpt.config);
    write_file(dir / "config.json", json{{"config", cfg}, {"iteration", ckpt.iteration}}.dump(2) + "\n");
    std::string hist;
    for (const auto& r : ckpt.history) hist += r.dump() + "\n";
    write_file(dir / "history.jsonl", hist);
    save_vocab_tsv(ckpt.vocab, dir / "vocab.tsv");
}

Checkpoint load_checkpoint(const fs::path& dir) {
    Checkpoint c;
    c.params = load_store<float>(dir);
    const json meta = parse_json(read_file(dir / "config.json"), dir / "config.json");
    try {
        c.config = config_from_json(meta.at("config"));
        c.iteration = meta.at("iteration").get<long>();
    } catch (const json::exception& e) {
        throw data_error("CorruptCheckpoint", "config.json: " + std::string(e.what()));
    }
    std::istringstream hist(fs::exists(dir / "history.jsonl") ? read_file(dir / "history.jsonl") : std::string());
    std::string line;
    while (std::getline(hist, line))
        if (!line.empty()) c.history.push_back(parse_json(line, dir / "history.jsonl"));
    c.vocab = load_vocab_tsv(dir / "vocab.tsv");
    return c;
}

void restore_entries(ParameterStore<float>& dst, const ParameterStore<float>& src,
                     const std::function<bool(const std::string&)>& select) {
    for (auto& e : dst.entries()) {
        if (!select(e.name)) continue;
        if (!src.contains(e.name)) throw data_error("CorruptCheckpoint", "missing entry " + e.name);
        const auto& s = src.entry(e.name);
        if (s.shape != e.shape)
            throw data_error("CorruptCheckpoint", "entry " + e.name + " has shape " + shape_string(s.shape) +
                                                      ", configuration expects " + shape_string(e.shape));
        e.values = s.values;
    }
}

}  // namespace absnet
