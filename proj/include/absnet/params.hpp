#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "absnet/errors.hpp"

namespace absnet {

inline std::size_t shape_size(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string shape_string(const std::vector<int>& shape);

// Named, shaped parameter arrays. Entries keep insertion order, which fixes
// the checkpoint layout and the order of every reduction over parameters.
template <class T>
class ParameterStore {
public:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<T> values;
    };

    std::span<T> add(const std::string& name, std::vector<int> shape) {
        if (index_.count(name)) throw usage_error("DuplicateParameter", name);
        index_.emplace(name, entries_.size());
        const std::size_t n = shape_size(shape);
        entries_.push_back(Entry{name, std::move(shape), std::vector<T>(n, T(0))});
        return entries_.back().values;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::span<T> get(const std::string& name) { return entry(name).values; }
    std::span<const T> get(const std::string& name) const { return entry(name).values; }

    const std::vector<int>& shape(const std::string& name) const { return entry(name).shape; }

    Entry& entry(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw usage_error("UnknownParameter", name);
        return entries_[it->second];
    }
    const Entry& entry(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw usage_error("UnknownParameter", name);
        return entries_[it->second];
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.values.size();
        return n;
    }

    // Same names and shapes, zero values.
    ParameterStore zeros_like() const {
        ParameterStore out;
        for (const auto& e : entries_) out.add(e.name, e.shape);
        return out;
    }

    void zero() {
        for (auto& e : entries_) std::fill(e.values.begin(), e.values.end(), T(0));
    }

    template <class U>
    ParameterStore<U> cast() const {
        ParameterStore<U> out;
        for (const auto& e : entries_) {
            auto dst = out.add(e.name, e.shape);
            std::transform(e.values.begin(), e.values.end(), dst.begin(),
                           [](T v) { return static_cast<U>(v); });
        }
        return out;
    }

    // Copy values of every entry whose name passes `select` from `src`;
    // shapes must agree.
    void copy_from(const ParameterStore& src, const std::function<bool(const std::string&)>& select) {
        for (auto& e : entries_) {
            if (!select(e.name)) continue;
            const auto& s = src.entry(e.name);
            if (s.shape != e.shape)
                throw data_error("CorruptCheckpoint", "shape mismatch for " + e.name);
            e.values = s.values;
        }
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline bool starts_with(const std::string& s, const std::string& prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace absnet
