#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "airm/params.hpp"
#include "airm/tensor.hpp"

namespace airm::ckpt {

// Versioned binary container of named float32 arrays (parameters and
// batchnorm buffers) plus the resolved config snapshot.
struct Checkpoint {
    uint32_t version = 1;
    uint64_t iteration = 0;
    std::string config_text;
    std::vector<std::pair<std::string, TensorF>> tensors;

    const TensorF* find(const std::string& name) const {
        for (auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
};

void save(const Checkpoint& c, const std::string& path);
Checkpoint load(const std::string& path);

template <typename T>
Checkpoint from_store(const ParamStore<T>& store, uint64_t iteration,
                      const std::string& config_text) {
    Checkpoint c;
    c.iteration = iteration;
    c.config_text = config_text;
    for (size_t i = 0; i < store.size(); ++i)
        c.tensors.emplace_back(store.names()[i],
                               store.params()[i]->value.template cast<float>());
    auto& mutable_store = const_cast<ParamStore<T>&>(store);
    for (size_t i = 0; i < store.buffer_count(); ++i)
        c.tensors.emplace_back(store.buffer_names()[i],
                               mutable_store.buffer(i).template cast<float>());
    return c;
}

// Copies values into an already-built store; every store entry must be
// present with a matching shape.
template <typename T>
void load_into_store(const Checkpoint& c, ParamStore<T>& store) {
    auto fetch = [&](const std::string& name,
                     const std::vector<int>& shape) -> const TensorF& {
        const TensorF* t = c.find(name);
        if (!t) throw ShapeError("checkpoint is missing tensor '" + name + "'");
        if (t->shape() != shape)
            throw ShapeError("checkpoint tensor '" + name + "' has shape " +
                             t->shape_str() + ", expected " +
                             TensorF(shape).shape_str());
        return *t;
    };
    for (size_t i = 0; i < store.size(); ++i) {
        auto& p = store.params()[i];
        p->value = fetch(store.names()[i], p->value.shape()).template cast<T>();
    }
    for (size_t i = 0; i < store.buffer_count(); ++i) {
        auto& b = store.buffer(i);
        b = fetch(store.buffer_names()[i], b.shape()).template cast<T>();
    }
}

}  // namespace airm::ckpt
