#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "absnet/config.hpp"
#include "absnet/params.hpp"
#include "absnet/vocab.hpp"
#include "json.hpp"

namespace absnet {

struct Checkpoint {
    ParameterStore<float> params;
    RunConfig config;
    Vocabulary vocab;
    long iteration = 0;
    std::vector<nlohmann::json> history;  // metric records
};

// Directory layout: manifest.json, params.bin, config.json, history.jsonl,
// vocab.tsv. Overwrites an existing checkpoint directory.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

// Throws CheckpointNotFound / CorruptCheckpoint.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Raw store I/O. dtype "f32" or "f64"; params.bin is little-endian.
template <class T>
void save_store(const ParameterStore<T>& store, const std::filesystem::path& dir);
template <class T>
ParameterStore<T> load_store(const std::filesystem::path& dir);

// Copies the entries of `dst` selected by `select` from `src`. A missing
// entry or a shape difference throws CorruptCheckpoint naming the entry.
void restore_entries(ParameterStore<float>& dst, const ParameterStore<float>& src,
                     const std::function<bool(const std::string&)>& select);

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace absnet
