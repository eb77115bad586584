#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "absnet/corpus.hpp"
#include "json.hpp"

namespace absnet {

// On-disk dataset: images/<id>.png + pairs.jsonl + manifest.json.
struct Dataset {
    std::filesystem::path root;
    std::vector<ImageTextPair> pairs;
    nlohmann::json manifest;

    std::vector<const ImageTextPair*> with_split(Split s) const;
};

// Per-class / per-split counts in the manifest layout.
nlohmann::json count_summary(const std::vector<ImageTextPair>& pairs);

// Single writer. `manifest_extra` keys are merged into manifest.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<ImageTextPair>& pairs,
                   const nlohmann::json& manifest_extra);

// Throws DatasetNotFound / CorruptDataset.
Dataset read_dataset(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);

std::string image_file_name(const std::string& pair_id);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& bytes);

nlohmann::json text_to_json(const TokenizedText& t);
TokenizedText text_from_json(const nlohmann::json& j);

}  // namespace absnet
