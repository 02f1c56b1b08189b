#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dplac/core/math.hpp"
#include "dplac/nn/params.hpp"

namespace dplac::nn {

enum class Activation { identity, relu, tanh, softplus };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::softplus: return "softplus";
    }
    return "?";
}

inline void apply_activation(Activation act, RowMatrix& m) {
    switch (act) {
        case Activation::identity: break;
        case Activation::relu: m = m.cwiseMax(0.0); break;
        case Activation::tanh: m = m.array().tanh().matrix(); break;
        case Activation::softplus: m = m.unaryExpr([](double x) { return softplus(x); }); break;
    }
}

/// Multiplies `grad` in place by the activation derivative, recovered from the
/// post-activation output.
inline void activation_backward(Activation act, const RowMatrix& out, RowMatrix& grad) {
    switch (act) {
        case Activation::identity: break;
        case Activation::relu: grad = grad.cwiseProduct((out.array() > 0.0).cast<double>().matrix()); break;
        case Activation::tanh: grad = grad.cwiseProduct((1.0 - out.array().square()).matrix()); break;
        case Activation::softplus:
            // softplus'(x) = sigmoid(x) = 1 - exp(-softplus(x))
            grad = grad.cwiseProduct((1.0 - (-out.array()).exp()).matrix());
            break;
    }
}

struct DenseSpec {
    std::string name;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    Activation activation = Activation::identity;
};

/// Activation plan for a feed-forward stack. Parameters live in a ParamSet
/// under the layer names, so several plans can share one ParamSet.
struct Mlp {
    std::vector<DenseSpec> layers;

    /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last one `output`.
    static Mlp make(const std::string& prefix, const std::vector<std::size_t>& widths, Activation hidden,
                    Activation output = Activation::identity) {
        if (widths.size() < 2) throw ShapeError("mlp '" + prefix + "' needs at least input and output widths");
        Mlp m;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            m.layers.push_back({prefix + "/l" + std::to_string(i), widths[i], widths[i + 1],
                                i + 2 == widths.size() ? output : hidden});
        }
        return m;
    }

    [[nodiscard]] std::size_t in_dim() const { return layers.front().fan_in; }
    [[nodiscard]] std::size_t out_dim() const { return layers.back().fan_out; }

    void init(ParamSet& params, Rng& rng) const {
        for (const auto& l : layers) params.add_glorot(l.name, l.fan_in, l.fan_out, rng);
    }

    /// Zeroes the weights and biases of the last layer.
    void zero_output_layer(ParamSet& params) const {
        auto& last = params.at(layers.back().name);
        last.weights.fill(0.0);
        last.biases.fill(0.0);
    }
};

/// Recorded layer inputs/outputs of one forward pass.
struct MlpTape {
    std::vector<RowMatrix> inputs;
    std::vector<RowMatrix> outputs;

    [[nodiscard]] bool empty() const { return inputs.empty(); }
};

/// Batched forward pass. `x` is [batch, fan_in]; returns [batch, fan_out].
inline RowMatrix forward(const ParamSet& params, const Mlp& plan, const RowMatrix& x, MlpTape* tape = nullptr) {
    if (tape) {
        tape->inputs.clear();
        tape->outputs.clear();
    }
    RowMatrix h = x;
    for (const auto& spec : plan.layers) {
        const auto& layer = params.at(spec.name);
        if (static_cast<std::size_t>(h.cols()) != layer.fan_in() || layer.fan_out() != spec.fan_out) {
            throw ShapeError("layer '" + spec.name + "' expects fan-in " + std::to_string(layer.fan_in()) +
                             " but received width " + std::to_string(h.cols()));
        }
        RowMatrix y = h * layer.weights.matrix().transpose();
        y.rowwise() += layer.biases.matrix().row(0);
        apply_activation(spec.activation, y);
        if (tape) {
            tape->inputs.push_back(std::move(h));
            tape->outputs.push_back(y);
        }
        h = std::move(y);
    }
    return h;
}

/// Tensor-level convenience wrapper; input is [batch, in] or [in].
inline Tensor forward(const ParamSet& params, const Mlp& plan, const Tensor& input) {
    RowMatrix x = input.matrix();
    RowMatrix y = forward(params, plan, x);
    if (input.rank() == 1) return Tensor::from_vector(std::span<const double>(y.data(), y.size()));
    return Tensor::from_matrix(y);
}

/// Reverse pass: given dLoss/dOutput, accumulates parameter gradients into
/// `grads` and returns dLoss/dInput.
inline RowMatrix backward(const ParamSet& params, const Mlp& plan, const MlpTape& tape, const RowMatrix& dy,
                          ParamSet& grads) {
    if (tape.inputs.size() != plan.layers.size()) throw Error("tape missing for mlp backward pass");
    RowMatrix g = dy;
    for (std::size_t k = plan.layers.size(); k-- > 0;) {
        const auto& spec = plan.layers[k];
        if (g.rows() != tape.outputs[k].rows() || g.cols() != tape.outputs[k].cols())
            throw ShapeError("gradient shape mismatch at layer '" + spec.name + "'");
        activation_backward(spec.activation, tape.outputs[k], g);
        auto& gl = grads.at(spec.name);
        gl.weights.matrix().noalias() += g.transpose() * tape.inputs[k];
        gl.biases.matrix().row(0) += g.colwise().sum();
        RowMatrix gin = g * params.at(spec.name).weights.matrix();
        g = std::move(gin);
    }
    return g;
}

}  // namespace dplac::nn
