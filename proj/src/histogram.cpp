#include "dsi/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsi {

namespace {

void require_dim(std::size_t d, const char* what) {
    if (d != 1 && d != 2)
        throw std::invalid_argument(std::string(what) +
                                    ": only 1-D and 2-D are supported");
}

std::vector<double> smooth_and_normalize(std::vector<double> masses) {
    double total = 0.0;
    for (double& m : masses) {
        m += kHistogramSmoothing;
        total += m;
    }
    for (double& m : masses) m /= total;
    return masses;
}

double sample_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

std::size_t HistogramSpec::total_bins() const {
    std::size_t n = 1;
    for (std::size_t j = 0; j < dim(); ++j) n *= bins_per_dim;
    return n;
}

HistogramSpec HistogramSpec::from_density(const GaussianMixtureSpec& p,
                                          std::size_t bins, double coverage) {
    require_dim(p.dim(), "HistogramSpec::from_density");
    HistogramSpec spec;
    spec.bins_per_dim = bins;
    const double tail = 0.5 * (1.0 - coverage);
    for (std::size_t j = 0; j < p.dim(); ++j) {
        spec.lo.push_back(p.quantile_axis(j, tail));
        spec.hi.push_back(p.quantile_axis(j, 1.0 - tail));
    }
    return spec;
}

HistogramSpec HistogramSpec::from_samples(const Matrix& samples, std::size_t bins,
                                          double coverage) {
    require_dim(samples.cols(), "HistogramSpec::from_samples");
    if (samples.rows() < 1000)
        throw std::invalid_argument("estimate_kl: need at least 1000 samples");
    HistogramSpec spec;
    spec.bins_per_dim = bins;
    const double tail = 0.5 * (1.0 - coverage);
    for (std::size_t j = 0; j < samples.cols(); ++j) {
        std::vector<double> col(samples.rows());
        for (std::size_t r = 0; r < samples.rows(); ++r) col[r] = samples(r, j);
        spec.lo.push_back(sample_quantile(col, tail));
        spec.hi.push_back(sample_quantile(std::move(col), 1.0 - tail));
    }
    return spec;
}

std::vector<double> bin_masses(const HistogramSpec& spec, const Matrix& samples) {
    require_dim(spec.dim(), "bin_masses");
    if (samples.cols() != spec.dim())
        throw std::invalid_argument("bin_masses: sample dim != histogram dim");
    const std::size_t B = spec.bins_per_dim;
    std::vector<double> counts(spec.total_bins(), 0.0);
    double kept = 0.0;
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        std::size_t flat = 0;
        bool in_range = true;
        for (std::size_t j = 0; j < spec.dim(); ++j) {
            const double x = samples(r, j);
            if (x < spec.lo[j] || x >= spec.hi[j]) {
                in_range = false;
                break;
            }
            const double w = (spec.hi[j] - spec.lo[j]) / static_cast<double>(B);
            const std::size_t b = std::min(
                static_cast<std::size_t>((x - spec.lo[j]) / w), B - 1);
            flat = flat * B + b;
        }
        if (in_range) {
            counts[flat] += 1.0;
            kept += 1.0;
        }
    }
    if (kept == 0.0) throw std::invalid_argument("bin_masses: no samples in range");
    for (double& c : counts) c /= kept;
    return smooth_and_normalize(std::move(counts));
}

std::vector<double> bin_masses(const HistogramSpec& spec, const GaussianMixtureSpec& p) {
    require_dim(spec.dim(), "bin_masses");
    if (p.dim() != spec.dim())
        throw std::invalid_argument("bin_masses: density dim != histogram dim");
    const std::size_t B = spec.bins_per_dim;

    // Diagonal mixture: per-component bin mass factorizes over axes.
    std::vector<double> masses(spec.total_bins(), 0.0);
    for (const auto& comp : p.components) {
        std::vector<std::vector<double>> axis_masses(spec.dim());
        for (std::size_t j = 0; j < spec.dim(); ++j) {
            axis_masses[j].resize(B);
            const double sd = std::sqrt(comp.var[j]);
            const double w = (spec.hi[j] - spec.lo[j]) / static_cast<double>(B);
            for (std::size_t b = 0; b < B; ++b) {
                const double a = spec.lo[j] + w * static_cast<double>(b);
                axis_masses[j][b] = gaussian_cdf(a + w, comp.mean[j], sd) -
                                    gaussian_cdf(a, comp.mean[j], sd);
            }
        }
        if (spec.dim() == 1) {
            for (std::size_t b = 0; b < B; ++b)
                masses[b] += comp.weight * axis_masses[0][b];
        } else {
            for (std::size_t b0 = 0; b0 < B; ++b0)
                for (std::size_t b1 = 0; b1 < B; ++b1)
                    masses[b0 * B + b1] +=
                        comp.weight * axis_masses[0][b0] * axis_masses[1][b1];
        }
    }
    double total = 0.0;
    for (double m : masses) total += m;
    if (total <= 0.0) throw std::invalid_argument("bin_masses: density has no mass in range");
    for (double& m : masses) m /= total;
    return smooth_and_normalize(std::move(masses));
}

KlEstimate kl_from_masses(const std::vector<double>& p, const std::vector<double>& q,
                          std::size_t n_p, std::size_t n_q) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl_from_masses: bin count mismatch");
    KlEstimate est;
    double var = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double term = std::log(p[i] / q[i]);
        est.value += p[i] * term;
        if (n_p > 0)
            var += (term + 1.0) * (term + 1.0) * p[i] * (1.0 - p[i]) /
                   static_cast<double>(n_p);
        if (n_q > 0)
            var += (p[i] / q[i]) * (p[i] / q[i]) * q[i] * (1.0 - q[i]) /
                   static_cast<double>(n_q);
    }
    est.value = std::max(est.value, 0.0);
    est.std_error = std::sqrt(var);
    return est;
}

KlEstimate estimate_kl(const Matrix& p_samples, const Matrix& q_samples,
                       const HistogramSpec* spec) {
    const HistogramSpec s =
        spec != nullptr ? *spec : HistogramSpec::from_samples(p_samples);
    return kl_from_masses(bin_masses(s, p_samples), bin_masses(s, q_samples),
                          p_samples.rows(), q_samples.rows());
}

KlEstimate estimate_kl(const GaussianMixtureSpec& p, const Matrix& q_samples,
                       const HistogramSpec* spec) {
    const HistogramSpec s = spec != nullptr ? *spec : HistogramSpec::from_density(p);
    return kl_from_masses(bin_masses(s, p), bin_masses(s, q_samples), 0,
                          q_samples.rows());
}

KlEstimate estimate_kl(const Matrix& p_samples, const GaussianMixtureSpec& q,
                       const HistogramSpec* spec) {
    const HistogramSpec s =
        spec != nullptr ? *spec : HistogramSpec::from_samples(p_samples);
    return kl_from_masses(bin_masses(s, p_samples), bin_masses(s, q),
                          p_samples.rows(), 0);
}

KlEstimate estimate_kl(const GaussianMixtureSpec& p, const GaussianMixtureSpec& q,
                       const HistogramSpec* spec) {
    const HistogramSpec s = spec != nullptr ? *spec : HistogramSpec::from_density(p);
    return kl_from_masses(bin_masses(s, p), bin_masses(s, q), 0, 0);
}

}  // namespace dsi
