#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "prism/array.hpp"

namespace prism {

// Named map of trainable arrays. Iteration order is the lexicographic name
// order of std::map, which keeps updates and serialization deterministic.
class ParameterStore {
public:
    void add(const std::string& name, Array a) {
        if (params_.count(name))
            throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
        if (!a.all_finite())
            throw std::invalid_argument("ParameterStore: non-finite values in '" + name + "'");
        params_.emplace(name, std::move(a));
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    const Array& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end())
            throw std::invalid_argument("ParameterStore: unknown parameter '" + name + "'");
        return it->second;
    }

    Array& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end())
            throw std::invalid_argument("ParameterStore: unknown parameter '" + name + "'");
        return it->second;
    }

    const std::map<std::string, Array>& all() const { return params_; }
    std::map<std::string, Array>& all() { return params_; }

    size_t count() const { return params_.size(); }

    size_t entry_count() const {
        size_t n = 0;
        for (const auto& [k, v] : params_) n += v.size();
        return n;
    }

private:
    std::map<std::string, Array> params_;
};

}  // namespace prism
