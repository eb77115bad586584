#include "absnet/features.hpp"

#include <cstring>
#include <sstream>

#include "absnet/dataset.hpp"
#include "absnet/errors.hpp"

namespace absnet {

namespace {

std::filesystem::path bin_path(const std::filesystem::path& index) {
    auto p = index;
    p.replace_extension(".bin");
    return p;
}

}  // namespace

void FeatureStore::add(const std::string& pair_id, std::vector<float> values) {
    if (static_cast<int>(values.size()) != dim_)
        throw data_error("DimensionMismatch", pair_id + ": " + std::to_string(values.size()) + " values, expected " +
                                                  std::to_string(dim_));
    if (!rows_.emplace(pair_id, std::move(values)).second) throw data_error("DuplicatePair", pair_id);
}

const std::vector<float>* FeatureStore::find(const std::string& pair_id) const {
    auto it = rows_.find(pair_id);
    return it == rows_.end() ? nullptr : &it->second;
}

void FeatureStore::save(const std::filesystem::path& index_path) const {
    static_assert(sizeof(float) == 4);
    std::ostringstream idx;
    idx << "absnet-features " << dim_ << ' ' << rows_.size() << '\n';
    std::string bin;
    std::size_t record = 0;
    for (const auto& [id, v] : rows_) {
        idx << id << ' ' << record++ << '\n';
        for (float x : v) {
            std::uint32_t u;
            std::memcpy(&u, &x, 4);
            for (int b = 0; b < 4; ++b) bin.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
        }
    }
    write_file(index_path, idx.str());
    write_file(bin_path(index_path), bin);
}

FeatureStore FeatureStore::load(const std::filesystem::path& index_path) {
    std::istringstream idx(read_file(index_path));
    const std::string bin = read_file(bin_path(index_path));
    std::string magic;
    long dim = 0, count = 0;
    if (!(idx >> magic >> dim >> count) || magic != "absnet-features" || dim <= 0 || count < 0)
        throw data_error("MalformedFeatureFile", index_path.string() + ": bad header");
    if (bin.size() != std::size_t(count) * std::size_t(dim) * 4)
        throw data_error("MalformedFeatureFile", index_path.string() + ": record file has " +
                                                     std::to_string(bin.size()) + " bytes, expected " +
                                                     std::to_string(count * dim * 4));
    FeatureStore fs(static_cast<int>(dim));
    std::string id;
    long record = 0;
    for (long i = 0; i < count; ++i) {
        if (!(idx >> id >> record) || record < 0 || record >= count)
            throw data_error("MalformedFeatureFile", index_path.string() + ": bad entry " + std::to_string(i));
        std::vector<float> v(static_cast<std::size_t>(dim));
        const unsigned char* p = reinterpret_cast<const unsigned char*>(bin.data()) + std::size_t(record) * dim * 4;
        for (long k = 0; k < dim; ++k) {
            std::uint32_t u = 0;
            for (int b = 0; b < 4; ++b) u |= std::uint32_t(p[k * 4 + b]) << (8 * b);
            std::memcpy(&v[std::size_t(k)], &u, 4);
        }
        fs.add(id, std::move(v));
    }
    return fs;
}

}  // namespace absnet
