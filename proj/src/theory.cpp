#include "dsi/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

namespace dsi {

GaussianMixtureSpec forward_marginal(const GaussianMixtureSpec& source,
                                     const NoiseSchedule& schedule, std::size_t s) {
    const auto [alpha, beta] = schedule.alpha_beta(s);
    GaussianMixtureSpec out;
    for (const auto& c : source.components) {
        GmmComponent nc;
        nc.weight = c.weight;
        nc.mean.resize(c.mean.size());
        nc.var.resize(c.var.size());
        for (std::size_t j = 0; j < c.mean.size(); ++j) {
            nc.mean[j] = beta * c.mean[j];
            nc.var[j] = beta * beta * c.var[j] + alpha * alpha;
        }
        out.components.push_back(std::move(nc));
    }
    return out;
}

EpsPredictor analytic_eps_predictor(const GaussianMixtureSpec& source,
                                    const NoiseSchedule& schedule) {
    // Precompute marginals for every step once; eps*(x,s) = -sqrt(1-abar) score.
    auto marginals = std::make_shared<std::vector<GaussianMixtureSpec>>();
    marginals->reserve(schedule.total_steps + 1);
    for (std::size_t s = 0; s <= schedule.total_steps; ++s)
        marginals->push_back(forward_marginal(source, schedule, s));
    const NoiseSchedule sched = schedule;
    return [marginals, sched](const Matrix& x, const std::vector<int>& s) {
        Matrix out(x.rows(), x.cols());
        std::vector<double> sc(x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const std::size_t step = static_cast<std::size_t>(s[r]);
            const double scale = -std::sqrt(1.0 - sched.alpha_bar(step));
            (*marginals)[step].score(x.row(r), sc.data());
            for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = scale * sc[j];
        }
        return out;
    };
}

void gauss_legendre(std::size_t n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {  // Legendre recurrence
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
}

namespace {

// log of the H integrand factor: -(1/(2 a^2)) [(1-a)^2 v^2 - 2 (1-a) x v]
inline double h_exponent(double alpha, double x, double v) {
    const double one_m = 1.0 - alpha;
    return -(one_m * one_m * v * v - 2.0 * one_m * x * v) / (2.0 * alpha * alpha);
}

double h_quadrature_once(double alpha, double x, const GaussianMixtureSpec& q,
                         std::size_t nodes_n, double support_sigmas) {
    std::vector<double> nodes, weights;
    gauss_legendre(nodes_n, nodes, weights);
    double total = 0.0;
    for (const auto& c : q.components) {
        const double sd = std::sqrt(c.var[0]);
        const double lo = c.mean[0] - support_sigmas * sd;
        const double hi = c.mean[0] + support_sigmas * sd;
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes_n; ++i) {
            const double v = mid + half * nodes[i];
            const double dens = c.weight / (sd * std::sqrt(2.0 * std::numbers::pi)) *
                                std::exp(-0.5 * (v - c.mean[0]) * (v - c.mean[0]) / c.var[0]);
            acc += weights[i] * std::exp(h_exponent(alpha, x, v)) * dens;
        }
        total += half * acc;
    }
    return total;
}

}  // namespace

double compute_H(double alpha, double x, const GaussianMixtureSpec& q,
                 const QuadratureConfig& cfg) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("compute_H: alpha must be in (0, 1]");
    if (q.dim() != 1) throw std::invalid_argument("compute_H: q must be 1-D");
    if (alpha == 1.0) return 1.0;  // exponent vanishes identically

    std::size_t n = cfg.nodes;
    double prev = h_quadrature_once(alpha, x, q, n, cfg.support_sigmas);
    for (std::size_t d = 0; d < cfg.max_doublings; ++d) {
        n *= 2;
        const double cur = h_quadrature_once(alpha, x, q, n, cfg.support_sigmas);
        if (std::abs(cur - prev) <= cfg.rel_tol * std::abs(cur)) return cur;
        prev = cur;
    }
    return prev;
}

double compute_H_closed_form(double alpha, double x, const GaussianMixtureSpec& q) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("compute_H_closed_form: alpha must be in (0, 1]");
    if (q.dim() != 1)
        throw std::invalid_argument("compute_H_closed_form: q must be 1-D");
    if (alpha == 1.0) return 1.0;
    const double one_m = 1.0 - alpha;
    const double a = one_m * one_m / (2.0 * alpha * alpha);
    const double b = one_m * x / (alpha * alpha);
    double total = 0.0;
    for (const auto& c : q.components) {
        const double s2 = c.var[0];
        const double mu = c.mean[0];
        const double A = a + 1.0 / (2.0 * s2);
        const double B = b + mu / s2;
        total += c.weight / std::sqrt(2.0 * s2 * A) *
                 std::exp(B * B / (4.0 * A) - mu * mu / (2.0 * s2));
    }
    return total;
}

double compute_F(double alpha, const GaussianMixtureSpec& p_T,
                 const GaussianMixtureSpec& q, const QuadratureConfig& cfg,
                 bool closed_form_inner) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("compute_F: alpha must be in (0, 1]");
    if (p_T.dim() != 1 || q.dim() != 1)
        throw std::invalid_argument("compute_F: 1-D distributions required");
    if (alpha == 1.0) return 0.0;  // log H == 0 everywhere

    auto log_h = [&](double x) {
        const double h = closed_form_inner ? compute_H_closed_form(alpha, x, q)
                                           : compute_H(alpha, x, q, cfg);
        return std::log(h);
    };

    auto outer_once = [&](std::size_t nodes_n) {
        std::vector<double> nodes, weights;
        gauss_legendre(nodes_n, nodes, weights);
        double total = 0.0;
        for (const auto& c : p_T.components) {
            const double sd = std::sqrt(c.var[0]);
            const double lo = c.mean[0] - cfg.support_sigmas * sd;
            const double hi = c.mean[0] + cfg.support_sigmas * sd;
            const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
            double acc = 0.0;
            for (std::size_t i = 0; i < nodes_n; ++i) {
                const double x = mid + half * nodes[i];
                const double dens =
                    c.weight / (sd * std::sqrt(2.0 * std::numbers::pi)) *
                    std::exp(-0.5 * (x - c.mean[0]) * (x - c.mean[0]) / c.var[0]);
                acc += weights[i] * dens * log_h(x);
            }
            total += half * acc;
        }
        return -total;
    };

    std::size_t n = cfg.nodes;
    double prev = outer_once(n);
    for (std::size_t d = 0; d < cfg.max_doublings; ++d) {
        n *= 2;
        const double cur = outer_once(n);
        if (std::abs(cur - prev) <= cfg.rel_tol * std::max(std::abs(cur), 1e-12))
            return cur;
        prev = cur;
    }
    return prev;
}

JsmEstimate estimate_jsm(const NoiseSchedule& schedule, const EpsPredictor& eps,
                         const GaussianMixtureSpec& source, std::size_t n_samples,
                         RngStream& rng) {
    const std::size_t T = schedule.total_steps;
    const std::size_t d = source.dim();
    std::vector<GaussianMixtureSpec> marginals;
    marginals.reserve(T + 1);
    for (std::size_t s = 0; s <= T; ++s)
        marginals.push_back(forward_marginal(source, schedule, s));

    const std::size_t batch = 512;
    Matrix xs(batch, d);
    std::vector<int> steps(batch);
    std::vector<double> x0(d), sc(d);

    double sum = 0.0, sum_sq = 0.0;
    std::size_t done = 0;
    while (done < n_samples) {
        const std::size_t m = std::min(batch, n_samples - done);
        for (std::size_t r = 0; r < m; ++r) {
            steps[r] = static_cast<int>(rng.next_below(T) + 1);
            const auto [alpha, beta] = schedule.alpha_beta(steps[r]);
            source.sample(rng, x0.data());
            for (std::size_t j = 0; j < d; ++j)
                xs(r, j) = beta * x0[j] + alpha * rng.next_normal();
        }
        Matrix head(m, d);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j) head(r, j) = xs(r, j);
        std::vector<int> head_steps(steps.begin(), steps.begin() + m);
        const Matrix eps_hat = eps(head, head_steps);
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t s = static_cast<std::size_t>(head_steps[r]);
            const double one_m_abar = 1.0 - schedule.alpha_bar(s);
            const double sigma_s = schedule.sigmas[s - 1];
            marginals[s].score(head.row(r), sc.data());
            double err2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double s_theta = -eps_hat(r, j) / std::sqrt(one_m_abar);
                const double diff = sc[j] - s_theta;
                err2 += diff * diff;
            }
            const double term = sigma_s * err2;
            sum += term;
            sum_sq += term * term;
        }
        done += m;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    const double scale = 0.5 * static_cast<double>(T);
    return {scale * mean, scale * std::sqrt(var / n)};
}

namespace {

std::vector<TheoremReport> verify_impl(const NoiseSchedule& schedule,
                                       const EpsPredictor& eps,
                                       const GaussianMixtureSpec& source,
                                       const GaussianMixtureSpec& target,
                                       const TheoremConfig& cfg, RngStream& rng,
                                       std::string warning) {
    if (source.dim() != 1 || target.dim() != 1)
        throw std::invalid_argument("verify_theorem: 1-D source/target required");

    const std::size_t T = schedule.total_steps;
    const GaussianMixtureSpec p_T = forward_marginal(source, schedule, T);
    const GaussianMixtureSpec rho = GaussianMixtureSpec::gaussian1d(0.0, 1.0);

    const JsmEstimate jsm = estimate_jsm(schedule, eps, source, cfg.n_jsm, rng);
    const KlEstimate kl_pT = estimate_kl(p_T, rho);
    const StrideSampler stride = StrideSampler::linear(schedule, cfg.stride_steps);
    const HistogramSpec hist = HistogramSpec::from_density(source);

    std::vector<TheoremReport> reports;
    for (const double alpha : cfg.alpha_grid) {
        TheoremReport rep;
        rep.alpha = alpha;
        rep.j_sm = jsm.value;
        rep.j_sm_std_error = jsm.std_error;
        rep.kl_pT_rho = kl_pT.value;
        rep.f_alpha = compute_F(alpha, p_T, target, cfg.quadrature);
        rep.bound = rep.j_sm + rep.kl_pT_rho + rep.f_alpha;
        rep.warning = warning;

        // omega: reverse the chain from step T, input (1-alpha) X' + alpha eps
        Matrix xhat(cfg.n_samples, 1);
        double xp = 0.0;
        for (std::size_t r = 0; r < cfg.n_samples; ++r) {
            target.sample(rng, &xp);
            xhat(r, 0) = (1.0 - alpha) * xp + alpha * rng.next_normal();
        }
        const Matrix omega = reverse_sample_from(schedule, eps, xhat, T, stride, rng);
        const KlEstimate measured = estimate_kl(source, omega, &hist);
        rep.measured_kl = measured.value;
        rep.measured_std_error = measured.std_error;
        const double combined = std::sqrt(measured.std_error * measured.std_error +
                                          jsm.std_error * jsm.std_error);
        rep.holds = rep.measured_kl <= rep.bound + 3.0 * combined;
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace

std::vector<TheoremReport> verify_theorem(const DiffusionModel& model,
                                          const GaussianMixtureSpec& source,
                                          const GaussianMixtureSpec& target,
                                          const TheoremConfig& cfg, RngStream& rng) {
    std::string warning;
    const double loss_threshold =
        cfg.untrained_loss_factor * static_cast<double>(model.data_dim());
    if (model.final_training_loss > loss_threshold)
        warning = "model looks untrained: final loss " +
                  std::to_string(model.final_training_loss) + " above threshold " +
                  std::to_string(loss_threshold);
    return verify_impl(model.schedule, eps_predictor_of(model), source, target, cfg,
                       rng, std::move(warning));
}

std::vector<TheoremReport> verify_theorem(const NoiseSchedule& schedule,
                                          const EpsPredictor& eps,
                                          const GaussianMixtureSpec& source,
                                          const GaussianMixtureSpec& target,
                                          const TheoremConfig& cfg, RngStream& rng) {
    return verify_impl(schedule, eps, source, target, cfg, rng, "");
}

std::string theorem_reports_csv(const std::vector<TheoremReport>& reports) {
    std::ostringstream os;
    os << "alpha,j_sm,j_sm_stderr,kl_pT_rho,f_alpha,bound,measured_kl,"
          "measured_stderr,holds,warning\n";
    os.precision(12);
    for (const auto& r : reports) {
        os << r.alpha << ',' << r.j_sm << ',' << r.j_sm_std_error << ','
           << r.kl_pT_rho << ',' << r.f_alpha << ',' << r.bound << ','
           << r.measured_kl << ',' << r.measured_std_error << ','
           << (r.holds ? 1 : 0) << ',' << r.warning << '\n';
    }
    return os.str();
}

std::string theorem_reports_text(const std::vector<TheoremReport>& reports) {
    std::ostringstream os;
    os.precision(6);
    for (const auto& r : reports) {
        os << "alpha=" << r.alpha << "  KL(p||omega)=" << r.measured_kl << " (+-"
           << r.measured_std_error << ")  <=?  J_SM=" << r.j_sm << " + KL(p_T||rho)="
           << r.kl_pT_rho << " + F(alpha)=" << r.f_alpha << "  [bound " << r.bound
           << "]  " << (r.holds ? "HOLDS" : "VIOLATED");
        if (!r.warning.empty()) os << "  (warning: " << r.warning << ")";
        os << '\n';
    }
    return os.str();
}

}  // namespace dsi
