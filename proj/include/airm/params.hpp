#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "airm/graph.hpp"
#include "airm/rng.hpp"

namespace airm {

// Ordered registry of named trainable tensors plus non-trainable buffers
// (e.g. batchnorm running statistics). Registration order is fixed by module
// construction, which makes seeded initialization reproducible.
template <typename T>
class ParamStore {
public:
    NodeP<T> add(const std::string& name, Tensor<T> init) {
        auto n = make_leaf<T>(std::move(init), true, name);
        names_.push_back(name);
        index_[name] = params_.size();
        params_.push_back(n);
        return n;
    }

    Tensor<T>* add_buffer(const std::string& name, Tensor<T> init) {
        buffer_names_.push_back(name);
        buffers_.push_back(std::make_unique<Tensor<T>>(std::move(init)));
        return buffers_.back().get();
    }

    size_t size() const { return params_.size(); }
    const std::vector<NodeP<T>>& params() const { return params_; }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<std::string>& buffer_names() const { return buffer_names_; }
    Tensor<T>& buffer(size_t i) { return *buffers_[i]; }
    size_t buffer_count() const { return buffers_.size(); }

    NodeP<T> find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second];
    }

    void zero_grads() {
        for (auto& p : params_) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (auto& p : params_) n += p->value.numel();
        return n;
    }

private:
    std::vector<NodeP<T>> params_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, size_t> index_;
    std::vector<std::unique_ptr<Tensor<T>>> buffers_;
    std::vector<std::string> buffer_names_;
};

namespace init {

// Kaiming-normal for layers followed by ReLU.
template <typename T>
Tensor<T> he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double std = std::sqrt(2.0 / double(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.normal() * std);
    return t;
}

template <typename T>
Tensor<T> xavier_uniform(std::vector<int> shape, int fan_in, int fan_out,
                         Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(-a, a));
    return t;
}

template <typename T>
Tensor<T> normal(std::vector<int> shape, double std, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.normal() * std);
    return t;
}

template <typename T>
Tensor<T> zeros(std::vector<int> shape) {
    return Tensor<T>(std::move(shape));
}

template <typename T>
Tensor<T> ones(std::vector<int> shape) {
    return Tensor<T>::full(std::move(shape), T(1));
}

}  // namespace init

// Adam with per-parameter moment tensors.
template <typename T>
class Adam {
public:
    Adam(ParamStore<T>& store, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : store_(store), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& p : store.params()) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        const auto& ps = store_.params();
        for (size_t i = 0; i < ps.size(); ++i) {
            auto& p = ps[i];
            if (p->grad.numel() != p->value.numel()) continue;
            T* w = p->value.data();
            const T* g = p->grad.data();
            T* m = m_[i].data();
            T* v = v_[i].data();
            const int64_t n = p->value.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
            for (int64_t j = 0; j < n; ++j) {
                m[j] = T(beta1_) * m[j] + T(1.0 - beta1_) * g[j];
                v[j] = T(beta2_) * v[j] + T(1.0 - beta2_) * g[j] * g[j];
                const double mhat = double(m[j]) / bc1;
                const double vhat = double(v[j]) / bc2;
                w[j] -= T(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    ParamStore<T>& store_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace airm
