#include "dsi/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dsi/checkpoint.hpp"

namespace dsi {

LogitsRecord make_logits_record(std::vector<double> logits) {
    if (logits.empty()) throw std::invalid_argument("LogitsRecord: empty logits");
    LogitsRecord rec;
    rec.probabilities.resize(logits.size());
    double best = logits[0];
    rec.predicted_class = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > best) {  // strict: ties keep the lowest index
            best = logits[i];
            rec.predicted_class = i;
        }
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        rec.probabilities[i] = std::exp(logits[i] - best);
        denom += rec.probabilities[i];
    }
    for (double& p : rec.probabilities) p /= denom;
    rec.logits = std::move(logits);
    return rec;
}

const char* confidence_kind_name(ConfidenceKind kind) {
    switch (kind) {
        case ConfidenceKind::MaxClassProbability: return "max_class_probability";
        case ConfidenceKind::MaxLogit: return "max_logit";
        case ConfidenceKind::KlToUniform: return "kl_to_uniform";
    }
    return "?";
}

ConfidenceKind confidence_kind_from_name(const std::string& name) {
    if (name == "max_class_probability") return ConfidenceKind::MaxClassProbability;
    if (name == "max_logit") return ConfidenceKind::MaxLogit;
    if (name == "kl_to_uniform") return ConfidenceKind::KlToUniform;
    throw std::invalid_argument("unknown confidence kind: " + name);
}

double confidence(const LogitsRecord& record, ConfidenceKind kind) {
    switch (kind) {
        case ConfidenceKind::MaxClassProbability:
            return record.probabilities[record.predicted_class];
        case ConfidenceKind::MaxLogit:
            return *std::max_element(record.logits.begin(), record.logits.end());
        case ConfidenceKind::KlToUniform: {
            const double c = static_cast<double>(record.probabilities.size());
            double kl = 0.0;
            for (double p : record.probabilities)
                if (p > 0.0) kl += p * std::log(c * p);
            return std::max(kl, 0.0);
        }
    }
    throw std::invalid_argument("confidence: bad kind");
}

LogitsRecord predict(const Predictor& f, const Matrix& x) {
    if (x.rows() != 1 || x.cols() != f.data_dim())
        throw std::invalid_argument("predict: expected a single row of width data_dim");
    const Matrix out = f.net.forward(x);
    return make_logits_record(std::vector<double>(out.data(), out.data() + out.cols()));
}

Matrix predict_logits(const Predictor& f, const Matrix& batch) {
    return f.net.forward(batch);
}

double accuracy(const Predictor& f, const Matrix& x, const std::vector<int>& labels) {
    if (x.rows() != labels.size())
        throw std::invalid_argument("accuracy: label count mismatch");
    const Matrix logits = predict_logits(f, x);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (logits(r, j) > logits(r, arg)) arg = j;
        if (static_cast<int>(arg) == labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(x.rows());
}

PredictorTrainResult train_predictor(const Matrix& x, const std::vector<int>& labels,
                                     std::size_t class_count,
                                     const PredictorTrainConfig& cfg, RngStream& rng) {
    if (x.rows() == 0 || x.rows() != labels.size())
        throw std::invalid_argument("train_predictor: bad dataset");
    if (class_count < 2)
        throw std::invalid_argument("train_predictor: need >= 2 classes");
    std::set<int> present(labels.begin(), labels.end());
    if (present.size() < 2)
        throw std::invalid_argument("train_predictor: dataset holds a single class");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count)
            throw std::invalid_argument("train_predictor: label out of range");

    std::vector<std::size_t> dims;
    dims.push_back(x.cols());
    for (std::size_t h : cfg.hidden_dims) dims.push_back(h);
    dims.push_back(class_count);
    Predictor f{MlpNetwork::create(dims, cfg.activation, std::nullopt, rng)};

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    adam_cfg.weight_decay = cfg.weight_decay;
    AdamState adam(f.net, adam_cfg);

    const std::size_t batch = std::min(cfg.batch_size, x.rows());
    Matrix xb(batch, x.cols());
    std::vector<int> yb(batch);
    std::size_t steps_run = cfg.max_steps;
    for (std::size_t it = 1; it <= cfg.max_steps; ++it) {
        for (std::size_t r = 0; r < batch; ++r) {
            const std::size_t src = rng.next_below(x.rows());
            for (std::size_t j = 0; j < x.cols(); ++j) xb(r, j) = x(src, j);
            yb[r] = labels[src];
        }
        const ForwardTrace trace = f.net.forward_trace(xb);
        const Matrix& logits = trace.acts.back();
        Matrix dout(batch, class_count);
        const double inv_n = 1.0 / static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
            double mx = logits(r, 0);
            for (std::size_t j = 1; j < class_count; ++j) mx = std::max(mx, logits(r, j));
            double denom = 0.0;
            for (std::size_t j = 0; j < class_count; ++j)
                denom += std::exp(logits(r, j) - mx);
            for (std::size_t j = 0; j < class_count; ++j) {
                const double p = std::exp(logits(r, j) - mx) / denom;
                dout(r, j) = (p - (static_cast<int>(j) == yb[r] ? 1.0 : 0.0)) * inv_n;
            }
        }
        adam.step(f.net, f.net.backward(trace, dout));
        if (cfg.early_stop_train_accuracy <= 1.0 &&
            it % cfg.early_stop_check_every == 0 &&
            accuracy(f, x, labels) >= cfg.early_stop_train_accuracy) {
            steps_run = it;
            break;
        }
    }
    const double final_acc = accuracy(f, x, labels);
    return {std::move(f), final_acc, steps_run};
}

void save_predictor(const Predictor& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open for write: " + path);
    write_network_blob(os, f.net);
    write_u32(os, static_cast<std::uint32_t>(f.class_count()));
    write_network_trailer(os, f.net);
    if (!os) throw CheckpointError("write failed: " + path);
}

Predictor load_predictor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    NetworkBlob blob = read_network_blob(is);
    const std::uint32_t class_count = read_u32(is);
    MlpNetwork net = assemble_network(std::move(blob), is);
    if (net.output_dim() != class_count)
        throw CheckpointError("predictor checkpoint: class count mismatch");
    return Predictor{std::move(net)};
}

}  // namespace dsi
