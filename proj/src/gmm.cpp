#include "dsi/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsi {

GaussianMixtureSpec GaussianMixtureSpec::single(std::vector<double> mean,
                                                std::vector<double> var) {
    GaussianMixtureSpec g;
    g.components.push_back({1.0, std::move(mean), std::move(var)});
    g.validate();
    return g;
}

GaussianMixtureSpec GaussianMixtureSpec::gaussian1d(double mean, double sd) {
    return single({mean}, {sd * sd});
}

std::size_t GaussianMixtureSpec::dim() const {
    return components.empty() ? 0 : components.front().mean.size();
}

void GaussianMixtureSpec::validate() const {
    if (components.empty())
        throw std::invalid_argument("GaussianMixtureSpec: no components");
    const std::size_t d = components.front().mean.size();
    double wsum = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d || c.var.size() != d)
            throw std::invalid_argument("GaussianMixtureSpec: inconsistent dims");
        if (!(c.weight > 0.0))
            throw std::invalid_argument("GaussianMixtureSpec: weights must be positive");
        for (double v : c.var)
            if (!(v > 0.0))
                throw std::invalid_argument("GaussianMixtureSpec: variances must be positive");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("GaussianMixtureSpec: weights must sum to 1");
}

namespace {
double component_log_density(const GmmComponent& c, const double* x) {
    constexpr double log2pi = 1.8378770664093454836;  // log(2*pi)
    double acc = 0.0;
    for (std::size_t j = 0; j < c.mean.size(); ++j) {
        const double d = x[j] - c.mean[j];
        acc += -0.5 * (log2pi + std::log(c.var[j]) + d * d / c.var[j]);
    }
    return acc;
}
}  // namespace

double GaussianMixtureSpec::log_density(const double* x) const {
    double best = -1e300;
    std::vector<double> logs(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        logs[i] = std::log(components[i].weight) + component_log_density(components[i], x);
        best = std::max(best, logs[i]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - best);
    return best + std::log(acc);
}

double GaussianMixtureSpec::density(const double* x) const {
    return std::exp(log_density(x));
}

double GaussianMixtureSpec::log_density1d(double x) const { return log_density(&x); }

void GaussianMixtureSpec::score(const double* x, double* out) const {
    const std::size_t d = dim();
    std::vector<double> logs(components.size());
    double best = -1e300;
    for (std::size_t i = 0; i < components.size(); ++i) {
        logs[i] = std::log(components[i].weight) + component_log_density(components[i], x);
        best = std::max(best, logs[i]);
    }
    double norm = 0.0;
    for (double l : logs) norm += std::exp(l - best);
    for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const double resp = std::exp(logs[i] - best) / norm;
        const auto& c = components[i];
        for (std::size_t j = 0; j < d; ++j)
            out[j] += resp * (-(x[j] - c.mean[j]) / c.var[j]);
    }
}

void GaussianMixtureSpec::sample(RngStream& rng, double* out) const {
    const double u = rng.next_unit();
    double acc = 0.0;
    const GmmComponent* chosen = &components.back();
    for (const auto& c : components) {
        acc += c.weight;
        if (u < acc) {
            chosen = &c;
            break;
        }
    }
    for (std::size_t j = 0; j < chosen->mean.size(); ++j)
        out[j] = chosen->mean[j] + std::sqrt(chosen->var[j]) * rng.next_normal();
}

Matrix GaussianMixtureSpec::sample_matrix(std::size_t n, RngStream& rng) const {
    Matrix m(n, dim());
    for (std::size_t r = 0; r < n; ++r) sample(rng, m.row(r));
    return m;
}

std::vector<double> GaussianMixtureSpec::mean() const {
    std::vector<double> mu(dim(), 0.0);
    for (const auto& c : components)
        for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += c.weight * c.mean[j];
    return mu;
}

double GaussianMixtureSpec::mean1d() const {
    if (dim() != 1) throw std::invalid_argument("mean1d: mixture is not 1-D");
    return mean()[0];
}

double gaussian_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

double GaussianMixtureSpec::cdf_axis(std::size_t axis, double x) const {
    double acc = 0.0;
    for (const auto& c : components)
        acc += c.weight * gaussian_cdf(x, c.mean[axis], std::sqrt(c.var[axis]));
    return acc;
}

double GaussianMixtureSpec::quantile_axis(std::size_t axis, double p) const {
    double lo = 0.0, hi = 0.0;
    for (const auto& c : components) {
        const double sd = std::sqrt(c.var[axis]);
        lo = std::min(lo, c.mean[axis] - 12.0 * sd);
        hi = std::max(hi, c.mean[axis] + 12.0 * sd);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf_axis(axis, mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace dsi
