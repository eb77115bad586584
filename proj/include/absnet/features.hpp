#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace absnet {

// Precomputed image features keyed by pair_id. On disk: an index file
// ("absnet-features <dim> <count>" header, then "<pair_id> <record>" lines)
// and a sibling .bin file of little-endian float32 records, one per line.
class FeatureStore {
public:
    FeatureStore() = default;
    explicit FeatureStore(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    std::size_t size() const { return rows_.size(); }

    // Throws DimensionMismatch / DuplicatePair.
    void add(const std::string& pair_id, std::vector<float> values);
    // Null when absent.
    const std::vector<float>* find(const std::string& pair_id) const;

    void save(const std::filesystem::path& index_path) const;
    // Throws FileNotFound / MalformedFeatureFile.
    static FeatureStore load(const std::filesystem::path& index_path);

private:
    int dim_ = 0;
    std::map<std::string, std::vector<float>> rows_;
};

}  // namespace absnet
