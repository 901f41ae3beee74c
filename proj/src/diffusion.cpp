#include "dsi/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dsi/checkpoint.hpp"
#include "dsi/kernels.hpp"

namespace dsi {

NoiseSchedule NoiseSchedule::linear(std::size_t T, double sigma_min, double sigma_max) {
    if (T == 0) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
    std::vector<double> s(T);
    for (std::size_t l = 0; l < T; ++l) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(l) / static_cast<double>(T - 1);
        s[l] = sigma_min + (sigma_max - sigma_min) * frac;
    }
    return from_sigmas(std::move(s));
}

NoiseSchedule NoiseSchedule::from_sigmas(std::vector<double> sigmas) {
    if (sigmas.empty()) throw std::invalid_argument("NoiseSchedule: empty sigmas");
    NoiseSchedule sched;
    sched.total_steps = sigmas.size();
    sched.cumprod.resize(sigmas.size() + 1);
    sched.cumprod[0] = 1.0;
    for (std::size_t l = 0; l < sigmas.size(); ++l) {
        if (!(sigmas[l] > 0.0 && sigmas[l] < 1.0))
            throw std::invalid_argument("NoiseSchedule: sigma_l must be in (0,1)");
        if (l > 0 && sigmas[l] < sigmas[l - 1])
            throw std::invalid_argument("NoiseSchedule: sigma_l must be non-decreasing");
        sched.cumprod[l + 1] = sched.cumprod[l] * (1.0 - sigmas[l]);
    }
    sched.sigmas = std::move(sigmas);
    return sched;
}

double NoiseSchedule::alpha_bar(std::size_t s) const {
    if (s > total_steps) throw std::out_of_range("alpha_bar: step out of range");
    return cumprod[s];
}

std::pair<double, double> NoiseSchedule::alpha_beta(std::size_t s) const {
    const double abar = alpha_bar(s);
    return {std::sqrt(1.0 - abar), std::sqrt(abar)};
}

StrideSampler StrideSampler::linear(const NoiseSchedule& schedule, std::size_t K) {
    const std::size_t T = schedule.total_steps;
    if (K == 0 || K > T) throw std::invalid_argument("StrideSampler: need 1 <= K <= T");
    StrideSampler st;
    st.sampled_steps = K;
    st.indices.reserve(K);
    for (std::size_t i = 1; i <= K; ++i) {
        const std::size_t idx = static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(T) /
                         static_cast<double>(K)));
        st.indices.push_back(std::max<std::size_t>(idx, 1));
    }
    st.indices.back() = T;
    for (std::size_t i = 1; i < st.indices.size(); ++i)
        if (st.indices[i] <= st.indices[i - 1])
            throw std::invalid_argument("StrideSampler: indices not strictly increasing");
    return st;
}

StrideSampler StrideSampler::full(const NoiseSchedule& schedule) {
    return linear(schedule, schedule.total_steps);
}

std::size_t StrideSampler::steps_from(std::size_t s) const {
    if (s == 0) return 0;
    const auto it = std::lower_bound(indices.begin(), indices.end(), s);
    const std::size_t below = static_cast<std::size_t>(it - indices.begin());
    return below + 1;  // stride indices strictly below s, plus the entry at s
}

EpsPredictor eps_predictor_of(const DiffusionModel& model) {
    const MlpNetwork* net = &model.eps_net;
    return [net](const Matrix& x, const std::vector<int>& s) {
        return net->forward(x, &s);
    };
}

Matrix forward_noise(const Matrix& x0, std::size_t s, const Matrix& eps,
                     const NoiseSchedule& schedule) {
    require_same_shape(x0, eps, "forward_noise");
    const auto [alpha, beta] = schedule.alpha_beta(s);
    Matrix out(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = beta * x0.data()[i] + alpha * eps.data()[i];
    return out;
}

LossAndGrads diffusion_training_loss(const DiffusionModel& model, const Matrix& x0,
                                     RngStream& rng) {
    if (x0.rows() == 0) throw std::invalid_argument("training_loss: empty batch");
    if (x0.cols() != model.data_dim())
        throw std::invalid_argument("training_loss: data dim mismatch");
    const std::size_t n = x0.rows(), d = x0.cols();
    const std::size_t T = model.schedule.total_steps;

    std::vector<int> steps(n);
    Matrix eps(n, d), xs(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        steps[r] = static_cast<int>(rng.next_below(T) + 1);
        const auto [alpha, beta] = model.schedule.alpha_beta(steps[r]);
        for (std::size_t j = 0; j < d; ++j) {
            const double e = rng.next_normal();
            eps(r, j) = e;
            xs(r, j) = beta * x0(r, j) + alpha * e;
        }
    }

    ForwardTrace trace = model.eps_net.forward_trace(xs, &steps);
    const Matrix& pred = trace.acts.back();
    Matrix dout(n, d);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < dout.size(); ++i) {
        const double diff = pred.data()[i] - eps.data()[i];
        loss += diff * diff;
        dout.data()[i] = 2.0 * diff * inv_n;
    }
    loss *= inv_n;
    if (!std::isfinite(loss))
        throw TrainingError("diffusion training loss is non-finite");
    return {loss, model.eps_net.backward(trace, dout)};
}

Matrix reverse_sample_from(const NoiseSchedule& schedule, const EpsPredictor& eps,
                           const Matrix& x_s, std::size_t s,
                           const StrideSampler& stride, RngStream& rng) {
    if (s > schedule.total_steps)
        throw std::out_of_range("reverse_sample_from: step out of range");
    if (s == 0) return x_s;

    std::vector<std::size_t> nodes;
    nodes.push_back(s);
    for (auto it = stride.indices.rbegin(); it != stride.indices.rend(); ++it)
        if (*it < s) nodes.push_back(*it);
    nodes.push_back(0);

    const std::size_t n = x_s.rows(), d = x_s.cols();
    Matrix cur = x_s;
    std::vector<int> step_col(n);
    for (std::size_t h = 0; h + 1 < nodes.size(); ++h) {
        const std::size_t a = nodes[h], b = nodes[h + 1];
        const double abar_a = schedule.alpha_bar(a);
        const double abar_b = schedule.alpha_bar(b);
        std::fill(step_col.begin(), step_col.end(), static_cast<int>(a));
        const Matrix eh = eps(cur, step_col);
        require_same_shape(eh, cur, "reverse_sample_from eps");

        const double sq_1m_a = std::sqrt(1.0 - abar_a);
        const double inv_sq_a = 1.0 / std::sqrt(abar_a);
        if (b == 0) {
            for (std::size_t i = 0; i < cur.size(); ++i)
                cur.data()[i] = (cur.data()[i] - sq_1m_a * eh.data()[i]) * inv_sq_a;
        } else {
            const double ratio = abar_a / abar_b;                // abar of the hop
            const double inv_1m_a = 1.0 / (1.0 - abar_a);
            const double coef_x = std::sqrt(ratio) * (1.0 - abar_b) * inv_1m_a;
            const double coef_x0 = std::sqrt(abar_b) * (1.0 - ratio) * inv_1m_a;
            const double post_var = (1.0 - abar_b) * (1.0 - ratio) * inv_1m_a;
            const double post_sd = std::sqrt(std::max(post_var, 0.0));
            for (std::size_t i = 0; i < cur.size(); ++i) {
                const double x0_hat = (cur.data()[i] - sq_1m_a * eh.data()[i]) * inv_sq_a;
                cur.data()[i] = coef_x * cur.data()[i] + coef_x0 * x0_hat +
                                post_sd * rng.next_normal();
            }
        }
    }
    (void)d;
    return cur;
}

Matrix reverse_sample_from(const DiffusionModel& model, const Matrix& x_s,
                           std::size_t s, const StrideSampler& stride,
                           RngStream& rng) {
    return reverse_sample_from(model.schedule, eps_predictor_of(model), x_s, s,
                               stride, rng);
}

DiffusionModel train_diffusion(const Matrix& data, const DiffusionTrainConfig& cfg,
                               const std::string& domain_id, RngStream& rng) {
    if (data.rows() == 0) throw std::invalid_argument("train_diffusion: empty dataset");
    const std::size_t d = data.cols();

    std::vector<std::size_t> dims;
    dims.push_back(d);
    for (std::size_t h : cfg.hidden_dims) dims.push_back(h);
    dims.push_back(d);

    DiffusionModel model{cfg.schedule,
                         MlpNetwork::create(dims, Activation::Tanh,
                                            cfg.time_embedding, rng),
                         domain_id};

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    adam_cfg.weight_decay = cfg.weight_decay;
    AdamState adam(model.eps_net, adam_cfg);

    const std::size_t batch = std::min(cfg.batch_size, data.rows());
    Matrix xb(batch, d);
    const std::size_t window = std::max<std::size_t>(cfg.loss_window, 1);
    std::vector<double> tail(window, 0.0);
    std::size_t seen = 0;
    for (std::size_t it = 0; it < cfg.steps; ++it) {
        for (std::size_t r = 0; r < batch; ++r) {
            const std::size_t src = rng.next_below(data.rows());
            for (std::size_t j = 0; j < d; ++j) xb(r, j) = data(src, j);
        }
        LossAndGrads lg = diffusion_training_loss(model, xb, rng);
        adam.step(model.eps_net, lg.grads);
        tail[it % window] = lg.loss;
        ++seen;
    }
    const std::size_t have = std::min(seen, window);
    double running = 0.0;
    for (std::size_t i = 0; i < have; ++i) running += tail[i];
    model.final_training_loss = have > 0 ? running / static_cast<double>(have) : 0.0;
    return model;
}

void save_diffusion_model(const DiffusionModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open for write: " + path);
    write_network_blob(os, model.eps_net);
    write_u32(os, static_cast<std::uint32_t>(model.schedule.total_steps));
    for (double s : model.schedule.sigmas) write_f64(os, s);
    write_u32(os, static_cast<std::uint32_t>(model.domain_id.size()));
    os.write(model.domain_id.data(),
             static_cast<std::streamsize>(model.domain_id.size()));
    write_network_trailer(os, model.eps_net);
    if (!os) throw CheckpointError("write failed: " + path);
}

DiffusionModel load_diffusion_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    NetworkBlob blob = read_network_blob(is);
    const std::uint32_t T = read_u32(is);
    std::vector<double> sigmas(T);
    for (auto& s : sigmas) s = read_f64(is);
    const std::uint32_t id_len = read_u32(is);
    std::string domain_id(id_len, '\0');
    is.read(domain_id.data(), id_len);
    MlpNetwork net = assemble_network(std::move(blob), is);
    DiffusionModel model{NoiseSchedule::from_sigmas(std::move(sigmas)),
                         std::move(net), std::move(domain_id)};
    return model;
}

}  // namespace dsi
