#pragma once

#include <cmath>
#include <map>
#include <string>

#include "dplac/core/rng.hpp"
#include "dplac/nn/tensor.hpp"

namespace dplac::nn {

/// One dense layer: weights are [fan_out, fan_in], biases are [fan_out].
struct LayerParams {
    Tensor weights;
    Tensor biases;

    [[nodiscard]] std::size_t fan_in() const { return weights.shape().at(1); }
    [[nodiscard]] std::size_t fan_out() const { return weights.shape().at(0); }

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Named collection of layers. Iteration order is lexicographic by name, which
/// keeps serialization and optimizer sweeps deterministic.
class ParamSet {
public:
    using Map = std::map<std::string, LayerParams>;

    void add(const std::string& name, LayerParams layer) {
        if (layer.weights.rank() != 2 || layer.biases.rank() != 1 ||
            layer.weights.shape()[0] != layer.biases.shape()[0]) {
            throw ShapeError("layer '" + name + "' has inconsistent weight/bias shapes " +
                             shape_string(layer.weights.shape()) + " / " + shape_string(layer.biases.shape()));
        }
        if (!layers_.emplace(name, std::move(layer)).second) {
            throw Error("duplicate layer name '" + name + "'");
        }
    }

    /// Adds a layer with uniform +-sqrt(6/(fan_in+fan_out)) weights and zero biases.
    void add_glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        auto w = Tensor::zeros({fan_out, fan_in});
        for (auto& v : w.values()) v = rng.uniform(-limit, limit);
        add(name, {std::move(w), Tensor::zeros({fan_out})});
    }

    [[nodiscard]] bool contains(const std::string& name) const { return layers_.count(name) != 0; }

    [[nodiscard]] const LayerParams& at(const std::string& name) const {
        auto it = layers_.find(name);
        if (it == layers_.end()) throw Error("no layer named '" + name + "'");
        return it->second;
    }
    [[nodiscard]] LayerParams& at(const std::string& name) {
        auto it = layers_.find(name);
        if (it == layers_.end()) throw Error("no layer named '" + name + "'");
        return it->second;
    }

    [[nodiscard]] std::size_t size() const noexcept { return layers_.size(); }
    [[nodiscard]] bool empty() const noexcept { return layers_.empty(); }
    [[nodiscard]] auto begin() const { return layers_.begin(); }
    [[nodiscard]] auto end() const { return layers_.end(); }
    [[nodiscard]] auto begin() { return layers_.begin(); }
    [[nodiscard]] auto end() { return layers_.end(); }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, l] : layers_) n += l.weights.size() + l.biases.size();
        return n;
    }

    [[nodiscard]] ParamSet zeros_like() const {
        ParamSet out;
        for (const auto& [name, l] : layers_)
            out.add(name, {Tensor::zeros(l.weights.shape()), Tensor::zeros(l.biases.shape())});
        return out;
    }

    [[nodiscard]] bool same_structure(const ParamSet& other) const {
        if (layers_.size() != other.layers_.size()) return false;
        auto a = layers_.begin();
        auto b = other.layers_.begin();
        for (; a != layers_.end(); ++a, ++b) {
            if (a->first != b->first || a->second.weights.shape() != b->second.weights.shape() ||
                a->second.biases.shape() != b->second.biases.shape())
                return false;
        }
        return true;
    }

    void require_same_structure(const ParamSet& other, const char* what) const {
        if (!same_structure(other)) throw ShapeError(std::string(what) + ": parameter structures differ");
    }

    [[nodiscard]] bool all_finite() const {
        for (const auto& [_, l] : layers_)
            if (!l.weights.all_finite() || !l.biases.all_finite()) return false;
        return true;
    }

    /// Applies fn(param_tensor, other_tensor) over matching tensors.
    template <typename Fn>
    void zip(const ParamSet& other, Fn&& fn) {
        require_same_structure(other, "zip");
        auto b = other.layers_.begin();
        for (auto a = layers_.begin(); a != layers_.end(); ++a, ++b) {
            fn(a->second.weights, b->second.weights);
            fn(a->second.biases, b->second.biases);
        }
    }

    void set_zero() {
        for (auto& [_, l] : layers_) {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    Map layers_;
};

/// target <- (1 - tau) * target + tau * online.
inline void soft_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw Error("soft update rate must lie in (0, 1]");
    target.zip(online, [tau](Tensor& t, const Tensor& o) {
        auto tv = t.values();
        auto ov = o.values();
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = (1.0 - tau) * tv[i] + tau * ov[i];
    });
}

}  // namespace dplac::nn
