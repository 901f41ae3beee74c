#pragma once

// Diagonal Gaussian mixtures: sampling, log-density, exact score. These carry
// the analytic source/target distributions and the closed-form forward
// marginals of the diffusion chain.

#include <utility>
#include <vector>

#include "dsi/matrix.hpp"
#include "dsi/rng.hpp"

namespace dsi {

struct GmmComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> var;  // diagonal covariance entries, strictly positive
};

struct GaussianMixtureSpec {
    std::vector<GmmComponent> components;

    static GaussianMixtureSpec single(std::vector<double> mean, std::vector<double> var);
    static GaussianMixtureSpec gaussian1d(double mean, double sd);

    std::size_t dim() const;
    void validate() const;

    double log_density(const double* x) const;
    double density(const double* x) const;
    double log_density1d(double x) const;
    // Exact score: grad_x log p(x).
    void score(const double* x, double* out) const;

    void sample(RngStream& rng, double* out) const;
    Matrix sample_matrix(std::size_t n, RngStream& rng) const;

    // First moment (per dimension).
    std::vector<double> mean() const;
    double mean1d() const;

    // CDF along one axis of the mixture marginal (diagonal components).
    double cdf_axis(std::size_t axis, double x) const;
    // Quantile along an axis via bisection on cdf_axis.
    double quantile_axis(std::size_t axis, double p) const;
};

double gaussian_cdf(double x, double mean, double sd);

}  // namespace dsi
