#include "dsi/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "dsi/kernels.hpp"

namespace dsi {

void sinusoidal_embedding(double t, const TimeEmbedding& te, double* out) {
    const std::size_t half = te.dim / 2;
    for (std::size_t j = 0; j < half; ++j) {
        const double freq = std::exp(-std::log(te.max_period) *
                                     static_cast<double>(j) / static_cast<double>(half));
        out[j] = std::sin(t * freq);
        out[half + j] = std::cos(t * freq);
    }
}

MlpNetwork::MlpNetwork(std::vector<std::size_t> dims, Activation act,
                       std::optional<TimeEmbedding> te,
                       std::vector<Matrix> weights, std::vector<Matrix> biases)
    : dims_(std::move(dims)), act_(act), te_(te),
      weights_(std::move(weights)), biases_(std::move(biases)) {
    if (dims_.size() < 2) throw std::invalid_argument("MlpNetwork: need >= 2 dims");
    if (te_ && te_->dim % 2 != 0)
        throw std::invalid_argument("MlpNetwork: time embedding dim must be even");
    const std::size_t emb = te_ ? te_->dim : 0;
    if (weights_.size() != dims_.size() - 1 || biases_.size() != weights_.size())
        throw std::invalid_argument("MlpNetwork: layer count mismatch");
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const std::size_t in = dims_[i] + (i == 0 ? emb : 0);
        require_shape(weights_[i], in, dims_[i + 1], "MlpNetwork weight");
        require_shape(biases_[i], 1, dims_[i + 1], "MlpNetwork bias");
    }
    if (param_count() == 0) throw std::invalid_argument("MlpNetwork: empty network");
}

MlpNetwork MlpNetwork::create(std::vector<std::size_t> dims, Activation act,
                              std::optional<TimeEmbedding> te, RngStream& rng) {
    if (dims.size() < 2) throw std::invalid_argument("MlpNetwork: need >= 2 dims");
    const std::size_t emb = te ? te->dim : 0;
    std::vector<Matrix> ws, bs;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t in = dims[i] + (i == 0 ? emb : 0);
        const std::size_t out = dims[i + 1];
        Matrix w(in, out);
        const double sc = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t p = 0; p < w.size(); ++p) w.data()[p] = sc * rng.next_normal();
        ws.push_back(std::move(w));
        bs.emplace_back(1, out);
    }
    return MlpNetwork(std::move(dims), act, te, std::move(ws), std::move(bs));
}

std::size_t MlpNetwork::param_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i)
        n += weights_[i].size() + biases_[i].size();
    return n;
}

Matrix MlpNetwork::assemble_input(const Matrix& x, const std::vector<int>* t) const {
    if (dims_.empty()) throw std::invalid_argument("MlpNetwork: empty network");
    if (x.cols() != dims_.front())
        throw std::invalid_argument("MlpNetwork: input dim mismatch");
    if (!te_) return x;
    if (t == nullptr || t->size() != x.rows())
        throw std::invalid_argument("MlpNetwork: time index required per row");
    const std::size_t d = x.cols(), e = te_->dim;
    Matrix in(x.rows(), d + e);
    std::vector<double> emb(e);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double* dst = in.row(r);
        const double* src = x.row(r);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
        sinusoidal_embedding(static_cast<double>((*t)[r]), *te_, emb.data());
        for (std::size_t j = 0; j < e; ++j) dst[d + j] = emb[j];
    }
    return in;
}

ForwardTrace MlpNetwork::forward_trace(const Matrix& x, const std::vector<int>* t) const {
    ForwardTrace tr;
    tr.acts.reserve(weights_.size() + 1);
    tr.acts.push_back(assemble_input(x, t));
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const Matrix& a = tr.acts.back();
        Matrix z(a.rows(), weights_[i].cols());
        kernels::gemm_nn(a.data(), weights_[i].data(), z.data(),
                         a.rows(), a.cols(), z.cols());
        kernels::add_bias_rows(z.data(), biases_[i].data(), z.rows(), z.cols());
        if (i + 1 < weights_.size()) {
            if (act_ == Activation::Tanh)
                kernels::tanh_forward(z.data(), z.size());
            else
                kernels::relu_forward(z.data(), z.size());
        }
        tr.acts.push_back(std::move(z));
    }
    return tr;
}

Matrix MlpNetwork::forward(const Matrix& x, const std::vector<int>* t) const {
    return forward_trace(x, t).acts.back();
}

MlpGradients MlpNetwork::zero_grads() const {
    MlpGradients g;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        g.weights.emplace_back(weights_[i].rows(), weights_[i].cols());
        g.biases.emplace_back(1, biases_[i].cols());
    }
    return g;
}

MlpGradients MlpNetwork::backward(const ForwardTrace& trace,
                                  const Matrix& loss_grad) const {
    const std::size_t L = weights_.size();
    if (trace.acts.size() != L + 1)
        throw std::invalid_argument("backward: trace does not match network");
    require_same_shape(loss_grad, trace.acts.back(), "backward loss_grad");

    MlpGradients g = zero_grads();
    Matrix d = loss_grad;
    for (std::size_t ii = L; ii-- > 0;) {
        const Matrix& a_in = trace.acts[ii];
        kernels::gemm_tn(a_in.data(), d.data(), g.weights[ii].data(),
                         a_in.rows(), a_in.cols(), d.cols());
        for (std::size_t r = 0; r < d.rows(); ++r)
            kernels::axpy(1.0, d.row(r), g.biases[ii].data(), d.cols());
        if (ii > 0) {
            Matrix dprev(d.rows(), weights_[ii].rows());
            kernels::gemm_nt(d.data(), weights_[ii].data(), dprev.data(),
                             d.rows(), d.cols(), weights_[ii].rows());
            if (act_ == Activation::Tanh)
                kernels::tanh_backward(dprev.data(), trace.acts[ii].data(), dprev.size());
            else
                kernels::relu_backward(dprev.data(), trace.acts[ii].data(), dprev.size());
            d = std::move(dprev);
        }
    }
    return g;
}

AdamState::AdamState(const MlpNetwork& net, AdamConfig cfg) : cfg_(cfg) {
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        m_w_.emplace_back(net.weights()[i].rows(), net.weights()[i].cols());
        v_w_.emplace_back(net.weights()[i].rows(), net.weights()[i].cols());
        m_b_.emplace_back(1, net.biases()[i].cols());
        v_b_.emplace_back(1, net.biases()[i].cols());
    }
}

namespace {
bool all_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}
}  // namespace

void AdamState::step(MlpNetwork& net, const MlpGradients& grads) {
    if (grads.weights.size() != m_w_.size())
        throw std::invalid_argument("adam_step: gradient layer count mismatch");
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
        if (!all_finite(grads.weights[i]) || !all_finite(grads.biases[i]))
            throw TrainingError("adam_step: non-finite gradient in layer " +
                                std::to_string(i));
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const double inv_bc1 = 1.0 / bc1;
    const double inv_bc2 = 1.0 / bc2;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
        kernels::adam_update(net.weights()[i].data(), m_w_[i].data(), v_w_[i].data(),
                             grads.weights[i].data(), net.weights()[i].size(),
                             cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.epsilon,
                             inv_bc1, inv_bc2, cfg_.weight_decay);
        kernels::adam_update(net.biases()[i].data(), m_b_[i].data(), v_b_[i].data(),
                             grads.biases[i].data(), net.biases()[i].size(),
                             cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.epsilon,
                             inv_bc1, inv_bc2, 0.0);
    }
}

}  // namespace dsi
