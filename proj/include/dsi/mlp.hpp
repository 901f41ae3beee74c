#pragma once

// Feedforward MLP with manual backprop. This is the only differentiated
// architecture in the project; diffusion noise-predictors get an optional
// sinusoidal time embedding concatenated to the input.

#include <optional>
#include <vector>

#include "dsi/matrix.hpp"
#include "dsi/rng.hpp"

namespace dsi {

enum class Activation { Tanh, Relu };

struct TimeEmbedding {
    std::size_t dim = 16;          // even
    double max_period = 10000.0;
};

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;  // 1 x out
};

struct ForwardTrace {
    // acts[0] is the assembled network input, acts[i+1] the post-activation
    // output of layer i (final layer is linear).
    std::vector<Matrix> acts;
};

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

class MlpNetwork {
public:
    MlpNetwork() = default;  // empty placeholder; populate before use

    // dims = [data_dim, hidden..., out]; the time embedding (when present)
    // widens the first weight matrix internally.
    static MlpNetwork create(std::vector<std::size_t> dims, Activation act,
                             std::optional<TimeEmbedding> te, RngStream& rng);

    Matrix forward(const Matrix& x, const std::vector<int>* t = nullptr) const;
    ForwardTrace forward_trace(const Matrix& x,
                               const std::vector<int>* t = nullptr) const;
    // loss_grad: d(loss)/d(output), same shape as forward output.
    MlpGradients backward(const ForwardTrace& trace, const Matrix& loss_grad) const;

    MlpGradients zero_grads() const;

    std::size_t data_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t layer_count() const { return weights_.size(); }
    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    Activation activation() const { return act_; }
    const std::optional<TimeEmbedding>& time_embedding() const { return te_; }
    std::size_t param_count() const;

    std::vector<Matrix>& weights() { return weights_; }
    const std::vector<Matrix>& weights() const { return weights_; }
    std::vector<Matrix>& biases() { return biases_; }
    const std::vector<Matrix>& biases() const { return biases_; }

    // Raw constructor for deserialization.
    MlpNetwork(std::vector<std::size_t> dims, Activation act,
               std::optional<TimeEmbedding> te, std::vector<Matrix> weights,
               std::vector<Matrix> biases);

private:
    Matrix assemble_input(const Matrix& x, const std::vector<int>* t) const;

    std::vector<std::size_t> dims_;
    Activation act_ = Activation::Tanh;
    std::optional<TimeEmbedding> te_;
    std::vector<Matrix> weights_;  // in x out
    std::vector<Matrix> biases_;   // 1 x out
};

// emb[j] = sin(t * f_j), emb[half+j] = cos(t * f_j), f_j = max_period^(-j/half).
// Injective over integer t in the used step ranges.
void sinusoidal_embedding(double t, const TimeEmbedding& te, double* out);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled; 0 = plain Adam
};

class AdamState {
public:
    AdamState(const MlpNetwork& net, AdamConfig cfg);

    // Throws TrainingError (with the layer index) on non-finite gradients.
    void step(MlpNetwork& net, const MlpGradients& grads);

    std::uint64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::uint64_t step_ = 0;
    std::vector<Matrix> m_w_, v_w_, m_b_, v_b_;
};

}  // namespace dsi
