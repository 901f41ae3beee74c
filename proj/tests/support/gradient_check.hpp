#pragma once

// Central finite-difference gradient oracle, independent of the analytic
// backward pass. Shared by the unit tests and the acceptance suite.

#include <cmath>
#include <functional>
#include <vector>

#include "dsi/mlp.hpp"

namespace dsi::testing {

// loss under a scalar loss head: loss(outputs) -> double
using LossFn = std::function<double(const Matrix&)>;

inline double loss_of(const MlpNetwork& net, const Matrix& x,
                      const std::vector<int>* t, const LossFn& loss) {
    return loss(net.forward(x, t));
}

// Returns max relative error between analytic grads and central differences.
inline double max_grad_rel_error(MlpNetwork& net, const Matrix& x,
                                 const std::vector<int>* t, const LossFn& loss,
                                 const Matrix& loss_grad, double h = 1e-5) {
    const ForwardTrace trace = net.forward_trace(x, t);
    const MlpGradients grads = net.backward(trace, loss_grad);

    double worst = 0.0;
    auto probe = [&](Matrix& param, const Matrix& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double save = param.data()[i];
            param.data()[i] = save + h;
            const double lp = loss_of(net, x, t, loss);
            param.data()[i] = save - h;
            const double lm = loss_of(net, x, t, loss);
            param.data()[i] = save;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = grad.data()[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        probe(net.weights()[l], grads.weights[l]);
        probe(net.biases()[l], grads.biases[l]);
    }
    return worst;
}

}  // namespace dsi::testing
