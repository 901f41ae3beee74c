#pragma once

// Discrete-time DDPM per source domain: noise schedule, forward noising,
// epsilon-prediction training, and ancestral reverse sampling from an
// arbitrary starting step over a strided sub-schedule.
//
// Continuous view (for orientation): the chain discretizes the VP forward SDE
// dx = -1/2 sigma(t) x dt + sqrt(sigma(t)) dw whose reverse SDE replaces the
// drift with -g^2 * score; we parametrize the network as a noise predictor
// and recover the score as s(x,s) = -eps(x,s)/sqrt(1-abar_s). Euler-Maruyama
// integration is not implemented separately; the DDPM updates below are the
// discretization used throughout.

#include <functional>
#include <string>

#include "dsi/matrix.hpp"
#include "dsi/mlp.hpp"
#include "dsi/rng.hpp"

namespace dsi {

struct NoiseSchedule {
    std::size_t total_steps = 0;     // T
    std::vector<double> sigmas;      // sigmas[l-1] = sigma_l, l = 1..T
    std::vector<double> cumprod;     // cumprod[s] = abar_s = prod_{l<=s}(1-sigma_l), abar_0 = 1

    // Standard DDPM linear schedule.
    static NoiseSchedule linear(std::size_t T = 1000, double sigma_min = 1e-4,
                                double sigma_max = 0.02);
    static NoiseSchedule from_sigmas(std::vector<double> sigmas);

    double alpha_bar(std::size_t s) const;
    // (alpha, beta) = (sqrt(1-abar_s), sqrt(abar_s)); alpha^2 + beta^2 = 1.
    std::pair<double, double> alpha_beta(std::size_t s) const;
};

struct StrideSampler {
    std::size_t sampled_steps = 0;        // K
    std::vector<std::size_t> indices;     // ascending subset of 1..T, last == T

    // Linear subsampling of 1..T down to K steps.
    static StrideSampler linear(const NoiseSchedule& schedule, std::size_t K);
    static StrideSampler full(const NoiseSchedule& schedule);

    // Number of reverse transitions consumed when starting from step s
    // (the entry step plus every stride index strictly below it).
    std::size_t steps_from(std::size_t s) const;
};

struct DiffusionModel {
    NoiseSchedule schedule;
    MlpNetwork eps_net;
    std::string domain_id;
    double final_training_loss = 0.0;

    std::size_t data_dim() const { return eps_net.data_dim(); }
};

// Any epsilon predictor: rows of x with one step index per row. Lets the
// analytic oracles stand in for a trained network.
using EpsPredictor = std::function<Matrix(const Matrix&, const std::vector<int>&)>;

EpsPredictor eps_predictor_of(const DiffusionModel& model);

// x_s = beta * x0 + alpha * eps.
Matrix forward_noise(const Matrix& x0, std::size_t s, const Matrix& eps,
                     const NoiseSchedule& schedule);

struct LossAndGrads {
    double loss = 0.0;
    MlpGradients grads;
};

// Denoising noise-prediction objective: mean over the batch of
// |eps - eps_net(beta x0 + alpha eps, s)|^2 with s ~ U{1..T} per example.
// Equivalent to the weighted score matching loss with lambda(t) = sigma_t^2
// up to a constant.
LossAndGrads diffusion_training_loss(const DiffusionModel& model, const Matrix& x0,
                                     RngStream& rng);

// Ancestral sampling from step s down to 0 along the strided sub-schedule:
// entry at s itself, then every stride index below s, then 0. Each hop a->b
// uses the generalized DDPM posterior with abar ratios; the final hop to 0
// returns the predicted x0 (no noise).
Matrix reverse_sample_from(const NoiseSchedule& schedule, const EpsPredictor& eps,
                           const Matrix& x_s, std::size_t s,
                           const StrideSampler& stride, RngStream& rng);
Matrix reverse_sample_from(const DiffusionModel& model, const Matrix& x_s,
                           std::size_t s, const StrideSampler& stride,
                           RngStream& rng);

struct DiffusionTrainConfig {
    NoiseSchedule schedule = NoiseSchedule::linear();
    std::vector<std::size_t> hidden_dims = {128, 128, 128};
    TimeEmbedding time_embedding;
    std::size_t steps = 4000;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::size_t loss_window = 100;   // running-loss horizon recorded on the model
};

DiffusionModel train_diffusion(const Matrix& data, const DiffusionTrainConfig& cfg,
                               const std::string& domain_id, RngStream& rng);

void save_diffusion_model(const DiffusionModel& model, const std::string& path);
DiffusionModel load_diffusion_model(const std::string& path);

}  // namespace dsi
