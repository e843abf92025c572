#pragma once

#include "nps/autodiff/tensor.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nps::nn {

// Insertion-ordered registry of trainable tensors, keyed "<network>/<layer>.<kind>".
template <class T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        ad::Tensor<T> tensor;
    };

    ad::Tensor<T> add(const std::string& name, ad::Tensor<T> tensor)
    {
        if (contains(name))
            throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
        tensor.set_name(name);
        tensor.set_requires_grad(true);
        entries_.push_back({name, tensor});
        return tensor;
    }

    bool contains(std::string_view name) const
    {
        for (const auto& e : entries_)
            if (e.name == name)
                return true;
        return false;
    }

    ad::Tensor<T> get(std::string_view name) const
    {
        for (const auto& e : entries_)
            if (e.name == name)
                return e.tensor;
        throw std::out_of_range("ParamStore: no parameter '" + std::string(name) + "'");
    }

    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<ad::Tensor<T>> tensors(std::string_view prefix = {}) const
    {
        std::vector<ad::Tensor<T>> out;
        for (const auto& e : entries_)
            if (e.name.starts_with(prefix))
                out.push_back(e.tensor);
        return out;
    }

    std::size_t parameter_count(std::string_view prefix = {}) const
    {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.name.starts_with(prefix))
                n += e.tensor.size();
        return n;
    }

private:
    std::vector<Entry> entries_;
};

} // namespace nps::nn
