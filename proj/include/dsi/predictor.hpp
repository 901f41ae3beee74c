#pragma once

// ERM softmax classifier over all source domains, with the confidence scores
// used by the adaptive starting-time loop.

#include <string>
#include <vector>

#include "dsi/matrix.hpp"
#include "dsi/mlp.hpp"

namespace dsi {

struct LogitsRecord {
    std::vector<double> logits;
    std::vector<double> probabilities;  // softmax of logits
    std::size_t predicted_class = 0;    // argmax, lowest index wins ties
};

LogitsRecord make_logits_record(std::vector<double> logits);

enum class ConfidenceKind { MaxClassProbability, MaxLogit, KlToUniform };

const char* confidence_kind_name(ConfidenceKind kind);
ConfidenceKind confidence_kind_from_name(const std::string& name);

// MaxClassProbability in [1/C, 1]; MaxLogit unbounded; KlToUniform >= 0.
double confidence(const LogitsRecord& record, ConfidenceKind kind);

struct Predictor {
    MlpNetwork net;  // no time embedding

    std::size_t class_count() const { return net.output_dim(); }
    std::size_t data_dim() const { return net.data_dim(); }
};

LogitsRecord predict(const Predictor& f, const Matrix& x);  // x is 1 x d
Matrix predict_logits(const Predictor& f, const Matrix& batch);
double accuracy(const Predictor& f, const Matrix& x, const std::vector<int>& labels);

struct PredictorTrainConfig {
    std::vector<std::size_t> hidden_dims = {64, 64};
    Activation activation = Activation::Tanh;
    std::size_t max_steps = 3000;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    // Stop once training accuracy reaches this level (checked periodically);
    // > 1 disables early stopping.
    double early_stop_train_accuracy = 2.0;
    std::size_t early_stop_check_every = 25;
};

struct PredictorTrainResult {
    Predictor predictor;
    double train_accuracy = 0.0;
    std::size_t steps_run = 0;
};

// ERM with softmax cross-entropy. Rejects single-class datasets.
PredictorTrainResult train_predictor(const Matrix& x, const std::vector<int>& labels,
                                     std::size_t class_count,
                                     const PredictorTrainConfig& cfg, RngStream& rng);

void save_predictor(const Predictor& f, const std::string& path);
Predictor load_predictor(const std::string& path);

}  // namespace dsi
