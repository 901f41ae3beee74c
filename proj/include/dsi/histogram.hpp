#pragma once

// Histogram KL estimation for 1-D and 2-D distributions. Samples and
// closed-form mixtures can appear on either side; analytic densities are
// integrated per bin (exact CDF differences for diagonal mixtures).
// Out-of-range mass is dropped and both sides renormalized over the range,
// then smoothed additively and renormalized again, so the estimate is a KL
// between two proper distributions and is nonnegative.

#include <vector>

#include "dsi/gmm.hpp"
#include "dsi/matrix.hpp"

namespace dsi {

struct HistogramSpec {
    std::size_t bins_per_dim = 50;
    std::vector<double> lo, hi;  // one entry per dimension (1 or 2)

    std::size_t dim() const { return lo.size(); }
    std::size_t total_bins() const;

    // Range covering `coverage` of the mass, per axis.
    static HistogramSpec from_density(const GaussianMixtureSpec& p,
                                      std::size_t bins = 50, double coverage = 0.999);
    static HistogramSpec from_samples(const Matrix& samples, std::size_t bins = 50,
                                      double coverage = 0.999);
};

inline constexpr double kHistogramSmoothing = 1e-10;

std::vector<double> bin_masses(const HistogramSpec& spec, const Matrix& samples);
std::vector<double> bin_masses(const HistogramSpec& spec, const GaussianMixtureSpec& p);

struct KlEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// KL(P||Q) over the binned masses; sample counts (0 for analytic sides) feed
// the delta-method standard error.
KlEstimate kl_from_masses(const std::vector<double>& p, const std::vector<double>& q,
                          std::size_t n_p, std::size_t n_q);

KlEstimate estimate_kl(const Matrix& p_samples, const Matrix& q_samples,
                       const HistogramSpec* spec = nullptr);
KlEstimate estimate_kl(const GaussianMixtureSpec& p, const Matrix& q_samples,
                       const HistogramSpec* spec = nullptr);
KlEstimate estimate_kl(const Matrix& p_samples, const GaussianMixtureSpec& q,
                       const HistogramSpec* spec = nullptr);
KlEstimate estimate_kl(const GaussianMixtureSpec& p, const GaussianMixtureSpec& q,
                       const HistogramSpec* spec = nullptr);

}  // namespace dsi
